//! Experience-free baseline: straight-line and random via-point initial
//! guesses, and best-of-N multi-start solving.

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::objective::{length_cost, ObjectiveParams, Path};
use crate::optimizer::{descend, is_path_feasible, DescentParams, DescentTrace};
use crate::rng::{self, Rng};
use crate::robot::RobotModel;
use crate::worldgen::SignedDistanceField;

/// Start and goal configuration in one world.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTask {
    pub world: usize,
    pub q_start: Vec<f64>,
    pub q_goal: Vec<f64>,
}

impl MotionTask {
    /// Stable identity used to derive per-start random streams.
    pub fn hash(&self) -> u64 {
        rng::hash_words(
            std::iter::once(self.world as u64)
                .chain(self.q_start.iter().map(|v| v.to_bits()))
                .chain(self.q_goal.iter().map(|v| v.to_bits())),
        )
    }

    pub fn reversed(&self) -> Self {
        Self {
            world: self.world,
            q_start: self.q_goal.clone(),
            q_goal: self.q_start.clone(),
        }
    }
}

/// Everything needed to run the solver on a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub objective: ObjectiveParams,
    pub descent: DescentParams,
    /// Waypoints per path.
    pub n_t: usize,
    /// Multi-starts per task, including the straight line.
    pub n_starts: usize,
}

impl SolverParams {
    pub fn for_voxel(voxel_size: f64) -> Self {
        Self {
            objective: ObjectiveParams::for_voxel(voxel_size),
            descent: DescentParams::default(),
            n_t: 20,
            n_starts: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.descent.validate()?;
        if self.n_t < 3 {
            return config_err("n_t must be at least 3");
        }
        if self.n_starts < 1 {
            return config_err("n_starts must be at least 1");
        }
        Ok(())
    }
}

pub fn straight_line_guess(task: &MotionTask, n_t: usize) -> Result<Path> {
    if task.q_start == task.q_goal {
        return config_err("start and goal coincide");
    }
    if task.q_start.len() != task.q_goal.len() {
        return config_err("start and goal differ in length");
    }
    let n_dof = task.q_start.len();
    let mut w = Array2::zeros((n_t, n_dof));
    for t in 0..n_t {
        let s = t as f64 / (n_t - 1) as f64;
        for j in 0..n_dof {
            w[[t, j]] = task.q_start[j] + s * (task.q_goal[j] - task.q_start[j]);
        }
    }
    // Pin the goal exactly.
    for j in 0..n_dof {
        w[[n_t - 1, j]] = task.q_goal[j];
    }
    Path::new(w)
}

/// Piecewise-linear guess through 1 to 3 uniform random via points.
pub fn random_guess(task: &MotionTask, n_t: usize, robot: &RobotModel, rng: &mut Rng) -> Result<Path> {
    let k = rng.random_range(1..=3);
    random_guess_with_vias(task, n_t, robot, k, rng)
}

/// [`random_guess`] with a fixed via-point count; `k = 0` is the straight line.
pub fn random_guess_with_vias(
    task: &MotionTask,
    n_t: usize,
    robot: &RobotModel,
    k: usize,
    rng: &mut Rng,
) -> Result<Path> {
    let straight = straight_line_guess(task, n_t)?;
    if k == 0 {
        return Ok(straight);
    }
    let mut pts = vec![task.q_start.clone()];
    pts.extend((0..k).map(|_| robot.random_config(rng)));
    pts.push(task.q_goal.clone());
    let seg_len: Vec<f64> = pts
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let total: f64 = seg_len.iter().sum();
    let n_dof = task.q_start.len();
    let mut w = straight.waypoints;
    let mut seg = 0;
    let mut seg_start = 0.0;
    for t in 1..n_t - 1 {
        let pos = total * t as f64 / (n_t - 1) as f64;
        while seg + 1 < seg_len.len() && pos > seg_start + seg_len[seg] {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let s = if seg_len[seg] > 0.0 {
            ((pos - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        for j in 0..n_dof {
            let a = pts[seg][j];
            w[[t, j]] = a + s * (pts[seg + 1][j] - a);
        }
    }
    Path::new(w)
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRun {
    pub trace: DescentTrace,
    pub feasible: bool,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct MultiStartResult {
    /// Shortest feasible result and the start that produced it.
    pub best: Option<(Path, usize)>,
    pub runs: Vec<StartRun>,
}

impl MultiStartResult {
    pub fn feasible_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.feasible).count() as f64 / self.runs.len() as f64
    }
}

/// Initial guess for start `i`: the straight line for `i = 0`, a random
/// via-point path drawn from the `(task, i)` stream otherwise.
pub fn start_guess(
    task: &MotionTask,
    robot: &RobotModel,
    n_t: usize,
    seed: u64,
    i: usize,
) -> Result<Path> {
    if i == 0 {
        straight_line_guess(task, n_t)
    } else {
        let mut r = rng::stream(seed, &[task.hash(), i as u64]);
        random_guess(task, n_t, robot, &mut r)
    }
}

/// Runs `params.n_starts` descents and keeps the feasible result with the
/// smallest length cost (ties go to the lower start index).
pub fn solve_multistart(
    task: &MotionTask,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    params: &SolverParams,
    seed: u64,
) -> Result<MultiStartResult> {
    params.validate()?;
    let results: Vec<(Path, StartRun)> = (0..params.n_starts)
        .into_par_iter()
        .map(|i| {
            let guess = start_guess(task, robot, params.n_t, seed, i)?;
            let (path, trace) = descend(&guess, robot, sdf, &params.objective, &params.descent)?;
            let feasible = is_path_feasible(&path, robot, sdf);
            let length = length_cost(&path)?;
            Ok((
                path,
                StartRun {
                    trace,
                    feasible,
                    length,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64)> = None;
    for (i, (_, run)) in results.iter().enumerate() {
        if run.feasible && best.is_none_or(|(_, l)| run.length < l) {
            best = Some((i, run.length));
        }
    }
    let mut runs = Vec::with_capacity(results.len());
    let mut best_path = None;
    for (i, (path, run)) in results.into_iter().enumerate() {
        if best.is_some_and(|(b, _)| b == i) {
            best_path = Some((path, i));
        }
        runs.push(run);
    }
    Ok(MultiStartResult {
        best: best_path,
        runs,
    })
}

/// Starts needed so that at least one succeeds with probability
/// `confidence` when each succeeds independently with probability `success`.
pub fn required_starts(success: f64, confidence: f64) -> Result<usize> {
    if !(success > 0.0 && success <= 1.0) {
        return config_err("per-start success probability must lie in (0, 1]");
    }
    if !(0.0..1.0).contains(&confidence) {
        return config_err("confidence must lie in [0, 1)");
    }
    if success == 1.0 {
        return Ok(1);
    }
    let n = ((1.0 - confidence).ln() / (1.0 - success).ln()).ceil();
    Ok((n as usize).max(1))
}

#[cfg(test)]
#[path = "multistart_tests.rs"]
mod tests;
