//! Fixed-step gradient descent on the free waypoints and the strict
//! (margin-based, unclipped) feasibility predicate.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{config_err, Error, Result};
use crate::objective::{choose_n_sub, evaluate, for_each_substep, ObjectiveParams, Path};
use crate::robot::{KinBuffer, RobotModel};
use crate::worldgen::SignedDistanceField;

/// How many substeps per segment to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubstepPolicy {
    Fixed(usize),
    /// Chosen from the path with [`choose_n_sub`].
    #[default]
    Auto,
}

impl SubstepPolicy {
    pub fn resolve(&self, path: &Path, robot: &RobotModel, voxel_size: f64) -> usize {
        match *self {
            SubstepPolicy::Fixed(n) => n.max(1),
            SubstepPolicy::Auto => choose_n_sub(path, robot, voxel_size),
        }
    }
}

impl Serialize for SubstepPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SubstepPolicy::Fixed(n) => s.serialize_u64(*n as u64),
            SubstepPolicy::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for SubstepPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) if n >= 1 => Ok(SubstepPolicy::Fixed(n as usize)),
            Raw::Name(s) if s == "auto" => Ok(SubstepPolicy::Auto),
            _ => Err(serde::de::Error::custom(
                "n_sub must be a positive integer or \"auto\"",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentParams {
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the gradient ∞-norm falls below this.
    pub converge_tol: f64,
    #[serde(default)]
    pub n_sub: SubstepPolicy,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            alpha: 0.001,
            max_iters: 100,
            converge_tol: 1e-4,
            n_sub: SubstepPolicy::Auto,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return config_err("alpha must be positive");
        }
        if self.max_iters < 1 {
            return config_err("max_iters must be at least 1");
        }
        if !(self.converge_tol >= 0.0) {
            return config_err("converge_tol must be non-negative");
        }
        Ok(())
    }

    pub fn with_max_iters(&self, max_iters: usize) -> Self {
        Self {
            max_iters,
            ..self.clone()
        }
    }
}

/// Per-iteration record. Entry `k` describes the path after `k` updates, so
/// a run with `m` updates has `m + 1` entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescentTrace {
    pub objective: Vec<f64>,
    pub feasible: Vec<bool>,
    pub first_feasible: Option<usize>,
}

impl DescentTrace {
    pub fn updates(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }

    /// Feasibility after `budget` updates; a run that converged earlier keeps
    /// its final state.
    pub fn feasible_at(&self, budget: usize) -> bool {
        match self.feasible.get(budget) {
            Some(&f) => f,
            None => self.feasible.last().copied().unwrap_or(false),
        }
    }

    /// Whether some iterate up to `budget` updates was feasible, i.e. a
    /// planner that stops at the first feasible path has succeeded.
    pub fn solved_within(&self, budget: usize) -> bool {
        self.first_feasible.is_some_and(|k| k <= budget)
    }

    fn push(&mut self, value: f64, feasible: bool) {
        if feasible && self.first_feasible.is_none() {
            self.first_feasible = Some(self.objective.len());
        }
        self.objective.push(value);
        self.feasible.push(feasible);
    }
}

/// Gradient descent `Q ← Q − α ∂U/∂Q` on rows `1..N_t−1`, clamped to the
/// joint limits after every step. Endpoints are never touched.
///
/// With [`SubstepPolicy::Auto`] the objective uses the count chosen for
/// `path0`, while the per-iteration feasibility flag re-resolves it for the
/// current path.
pub fn descend(
    path0: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    obj: &ObjectiveParams,
    params: &DescentParams,
) -> Result<(Path, DescentTrace)> {
    params.validate()?;
    let voxel = sdf.geometry.voxel_size;
    let limits = robot.limits();
    let mut path = path0.clone();
    let mut trace = DescentTrace::default();
    let n_t = path.n_t();
    // The objective keeps the substep count of the initial path so that every
    // iteration descends on the same function.
    let obj = obj.with_n_sub(params.n_sub.resolve(&path, robot, voxel));

    for it in 0..=params.max_iters {
        let (value, grad) = evaluate(&path, robot, sdf, &obj, true)?;
        let grad = grad.expect("gradient requested");
        if !value.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite objective or gradient at iteration {it} (step size {} too large?)",
                params.alpha
            )));
        }
        let check_n_sub = params.n_sub.resolve(&path, robot, voxel);
        trace.push(value.total, feasibility_check(&path, robot, sdf, check_n_sub));
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if it == params.max_iters || gmax < params.converge_tol {
            break;
        }
        for t in 1..n_t - 1 {
            for (j, lim) in limits.iter().enumerate() {
                let v = path.waypoints[[t, j]] - params.alpha * grad[[t - 1, j]];
                path.waypoints[[t, j]] = v.clamp(lim[0], lim[1]);
            }
        }
    }
    Ok((path, trace))
}

/// Every substep sample clears the world and all listed self pairs by at
/// least the robot margin.
pub fn feasibility_check(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    n_sub: usize,
) -> bool {
    let mut buf = KinBuffer::default();
    let mut q = vec![0.0; path.n_dof()];
    let mut ok = true;
    for_each_substep(path, n_sub.max(1), &mut q, |_, _, q| {
        if ok {
            robot.kinematics_into(q, false, &mut buf);
            ok = robot.buffer_feasible(sdf, &buf);
        }
    });
    ok
}

/// [`feasibility_check`] at the automatically chosen substep count.
pub fn is_path_feasible(path: &Path, robot: &RobotModel, sdf: &SignedDistanceField) -> bool {
    let n_sub = choose_n_sub(path, robot, sdf.geometry.voxel_size);
    feasibility_check(path, robot, sdf, n_sub)
}

#[cfg(test)]
#[path = "optimizer_tests.rs"]
mod tests;
