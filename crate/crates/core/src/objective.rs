//! Trajectory objective `U = U_C + w_s·U_s + λ·U_L` evaluated on linearly
//! interpolated substeps, with its analytic gradient.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::robot::{KinBuffer, RobotModel};
use crate::worldgen::SignedDistanceField;

/// Substep counts chosen automatically are clamped to this range.
pub const MAX_AUTO_SUBSTEPS: usize = 64;

/// Waypoint matrix, one configuration per row. The first and last rows are
/// the pinned endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Array2<f64>,
}

impl Path {
    pub fn new(waypoints: Array2<f64>) -> Result<Self> {
        if waypoints.nrows() < 3 {
            return config_err(format!("a path needs at least 3 waypoints, got {}", waypoints.nrows()));
        }
        if waypoints.ncols() == 0 {
            return config_err("a path needs at least one joint");
        }
        Ok(Self { waypoints })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_dof = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_dof) {
            return config_err("ragged waypoint rows");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((rows.len(), n_dof), flat)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(a)
    }

    pub fn n_t(&self) -> usize {
        self.waypoints.nrows()
    }

    pub fn n_dof(&self) -> usize {
        self.waypoints.ncols()
    }

    pub fn start(&self) -> ArrayView1<'_, f64> {
        self.waypoints.row(0)
    }

    pub fn goal(&self) -> ArrayView1<'_, f64> {
        self.waypoints.row(self.n_t() - 1)
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.waypoints.row(t).to_vec()
    }

    /// Rounds every entry to single precision (the on-disk resolution).
    pub fn quantized(&self) -> Self {
        Self {
            waypoints: self.waypoints.mapv(|v| v as f32 as f64),
        }
    }

    pub fn reversed(&self) -> Self {
        let mut w = self.waypoints.clone();
        w.invert_axis(ndarray::Axis(0));
        Self {
            waypoints: w.as_standard_layout().to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveParams {
    /// Length-cost weight λ.
    pub lambda: f64,
    /// Clipping width ε in meters.
    pub eps: f64,
    /// Substeps per segment; 1 evaluates waypoints only.
    pub n_sub: usize,
    pub include_self_collision: bool,
    pub self_weight: f64,
}

impl ObjectiveParams {
    /// Defaults scaled to a grid voxel size.
    pub fn for_voxel(voxel_size: f64) -> Self {
        Self {
            lambda: 0.1,
            eps: 2.0 * voxel_size,
            n_sub: 1,
            include_self_collision: true,
            self_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return config_err("lambda must be positive");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return config_err("eps must be positive");
        }
        if self.n_sub < 1 {
            return config_err("n_sub must be at least 1");
        }
        if !(self.self_weight >= 0.0) {
            return config_err("self_weight must be non-negative");
        }
        Ok(())
    }

    pub fn with_n_sub(&self, n_sub: usize) -> Self {
        Self {
            n_sub,
            ..self.clone()
        }
    }
}

/// Objective value and its parts. `total = collision + self_weight ·
/// self_collision + λ · length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub collision: f64,
    pub self_collision: f64,
    pub length: f64,
    pub total: f64,
}

/// Smooth one-sided penalty: linear inside, quadratic within `eps`, zero
/// beyond.
#[inline]
pub fn clip(d: f64, eps: f64) -> f64 {
    if d < 0.0 {
        -d + eps / 2.0
    } else if d <= eps {
        (d - eps) * (d - eps) / (2.0 * eps)
    } else {
        0.0
    }
}

#[inline]
pub fn clip_derivative(d: f64, eps: f64) -> f64 {
    if d < 0.0 {
        -1.0
    } else if d <= eps {
        (d - eps) / eps
    } else {
        0.0
    }
}

pub fn length_cost(path: &Path) -> Result<f64> {
    let w = &path.waypoints;
    let n = path.n_t();
    let direct: f64 = (&w.row(n - 1) - &w.row(0)).mapv(|v| v * v).sum();
    if !(direct > 0.0) {
        return Err(Error::Numeric(
            "length cost undefined for coincident endpoints".into(),
        ));
    }
    let steps: f64 = (0..n - 1)
        .map(|t| (&w.row(t + 1) - &w.row(t)).mapv(|v| v * v).sum())
        .sum();
    Ok((n - 1) as f64 / direct * steps)
}

/// `(N_t − 1)·n_sub + 1` interpolated configurations, final waypoint once.
pub fn substep_configs(path: &Path, n_sub: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity((path.n_t() - 1) * n_sub + 1);
    let mut q = vec![0.0; path.n_dof()];
    for_each_substep(path, n_sub.max(1), &mut q, |_, _, q| out.push(q.to_vec()));
    out
}

/// Calls `f(t, s, q)` for every substep `q = q_t + s (q_{t+1} − q_t)`; the
/// final waypoint is reported as `(N_t − 2, 1.0)`.
pub(crate) fn for_each_substep(
    path: &Path,
    n_sub: usize,
    q: &mut [f64],
    mut f: impl FnMut(usize, f64, &[f64]),
) {
    let w = &path.waypoints;
    let n = path.n_t();
    for t in 0..n - 1 {
        for u in 0..n_sub {
            let s = u as f64 / n_sub as f64;
            for (j, qj) in q.iter_mut().enumerate() {
                let a = w[[t, j]];
                *qj = a + s * (w[[t + 1, j]] - a);
            }
            f(t, s, q);
        }
    }
    for (j, qj) in q.iter_mut().enumerate() {
        *qj = w[[n - 1, j]];
    }
    f(n - 2, 1.0, q);
}

fn check_dims(path: &Path, robot: &RobotModel, sdf: Option<&SignedDistanceField>) -> Result<()> {
    if path.n_dof() != robot.n_dof() {
        return Err(Error::Dimension {
            expected: robot.n_dof(),
            got: path.n_dof(),
        });
    }
    if let Some(sdf) = sdf {
        if sdf.geometry.dim() != robot.dim {
            return Err(Error::Dimension {
                expected: robot.dim,
                got: sdf.geometry.dim(),
            });
        }
    }
    Ok(())
}

pub fn collision_cost(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    params: &ObjectiveParams,
) -> Result<f64> {
    check_dims(path, robot, Some(sdf))?;
    Ok(evaluate_terms(path, robot, Some(sdf), params, false, false).0)
}

pub fn self_collision_cost(path: &Path, robot: &RobotModel, params: &ObjectiveParams) -> Result<f64> {
    check_dims(path, robot, None)?;
    Ok(evaluate_terms(path, robot, None, params, true, false).1)
}

pub fn objective(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    params: &ObjectiveParams,
) -> Result<ObjectiveValue> {
    Ok(evaluate(path, robot, sdf, params, false)?.0)
}

/// Gradient with respect to the free waypoints, `(N_t − 2) × n_dof`.
pub fn objective_gradient(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    params: &ObjectiveParams,
) -> Result<Array2<f64>> {
    Ok(evaluate(path, robot, sdf, params, true)?
        .1
        .expect("gradient requested"))
}

/// Value and optionally gradient in a single pass over the substeps.
pub fn evaluate(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    params: &ObjectiveParams,
    want_grad: bool,
) -> Result<(ObjectiveValue, Option<Array2<f64>>)> {
    params.validate()?;
    check_dims(path, robot, Some(sdf))?;
    let length = length_cost(path)?;
    let (collision, self_collision, grad) = evaluate_terms(
        path,
        robot,
        Some(sdf),
        params,
        params.include_self_collision,
        want_grad,
    );
    let self_collision = if params.include_self_collision {
        self_collision
    } else {
        0.0
    };
    let value = ObjectiveValue {
        collision,
        self_collision,
        length,
        total: collision + params.self_weight * self_collision + params.lambda * length,
    };
    let grad = grad.map(|mut g| {
        add_length_gradient(path, params.lambda, &mut g);
        g
    });
    Ok((value, grad))
}

fn add_length_gradient(path: &Path, lambda: f64, grad: &mut Array2<f64>) {
    let w = &path.waypoints;
    let n = path.n_t();
    let direct: f64 = (&w.row(n - 1) - &w.row(0)).mapv(|v| v * v).sum();
    let c = lambda * (n - 1) as f64 / direct;
    for t in 1..n - 1 {
        for j in 0..path.n_dof() {
            grad[[t - 1, j]] += c * 2.0 * (2.0 * w[[t, j]] - w[[t - 1, j]] - w[[t + 1, j]]);
        }
    }
}

/// World and self collision sums (and their raw gradients, before any
/// weighting of the self term is applied).
fn evaluate_terms(
    path: &Path,
    robot: &RobotModel,
    sdf: Option<&SignedDistanceField>,
    params: &ObjectiveParams,
    with_self: bool,
    want_grad: bool,
) -> (f64, f64, Option<Array2<f64>>) {
    let n_t = path.n_t();
    let n_dof = path.n_dof();
    let eps = params.eps;
    let mut grad = want_grad.then(|| Array2::<f64>::zeros((n_t - 2, n_dof)));
    let mut world = 0.0;
    let mut selfc = 0.0;
    let mut buf = KinBuffer::default();
    let mut sample_grad = vec![0.0; n_dof];
    let mut q = vec![0.0; n_dof];
    let dim = robot.dim;

    for_each_substep(path, params.n_sub, &mut q, |t, s, q| {
        robot.kinematics_into(q, want_grad, &mut buf);
        sample_grad.iter_mut().for_each(|g| *g = 0.0);
        let mut touched = false;

        if let Some(sdf) = sdf {
            for (k, sphere) in robot.spheres.iter().enumerate() {
                let c = buf.centers[k];
                let (dist, dgrad) = if want_grad {
                    sdf.lookup_with_gradient(c.as_slice())
                } else {
                    (sdf.lookup(c.as_slice()), [0.0; 3])
                };
                let d = dist - sphere.radius;
                world += clip(d, eps);
                if want_grad {
                    let slope = clip_derivative(d, eps);
                    if slope != 0.0 {
                        touched = true;
                        for (j, g) in sample_grad.iter_mut().enumerate() {
                            let col = &buf.jac[k * n_dof + j];
                            let mut dot = 0.0;
                            for a in 0..dim {
                                dot += dgrad[a] * col[a];
                            }
                            *g += slope * dot;
                        }
                    }
                }
            }
        }

        if with_self {
            let sw = params.self_weight;
            for &(fa, fb) in &robot.self_pairs {
                for k in robot.frame_sphere_range(fa) {
                    for l in robot.frame_sphere_range(fb) {
                        let diff = buf.centers[k] - buf.centers[l];
                        let dist = diff.norm();
                        let d = dist - robot.spheres[k].radius - robot.spheres[l].radius;
                        selfc += clip(d, eps);
                        if want_grad && dist > 0.0 {
                            let slope = clip_derivative(d, eps);
                            if slope != 0.0 {
                                touched = true;
                                let nrm = diff / dist;
                                for (j, g) in sample_grad.iter_mut().enumerate() {
                                    let dj = buf.jac[k * n_dof + j] - buf.jac[l * n_dof + j];
                                    *g += sw * slope * nrm.dot(&dj);
                                }
                            }
                        }
                    }
                }
            }
        }

        if let (Some(grad), true) = (grad.as_mut(), touched) {
            // Sample depends on q_t with weight (1 − s) and q_{t+1} with s.
            for (row, weight) in [(t, 1.0 - s), (t + 1, s)] {
                if row == 0 || row == n_t - 1 || weight == 0.0 {
                    continue;
                }
                for j in 0..n_dof {
                    grad[[row - 1, j]] += weight * sample_grad[j];
                }
            }
        }
    });
    (world, selfc, grad)
}

/// Substeps per segment so that no sphere moves more than one voxel between
/// consecutive samples, clamped to `[1, MAX_AUTO_SUBSTEPS]`.
pub fn choose_n_sub(path: &Path, robot: &RobotModel, voxel_size: f64) -> usize {
    let w = &path.waypoints;
    let mut worst: f64 = 0.0;
    for t in 0..path.n_t() - 1 {
        let step: Vec<f64> = (0..path.n_dof())
            .map(|j| (w[[t + 1, j]] - w[[t, j]]).abs())
            .collect();
        for s in 0..robot.n_spheres() {
            let bound: f64 = step
                .iter()
                .enumerate()
                .map(|(j, dq)| robot.lever(s, j) * dq)
                .sum();
            worst = worst.max(bound);
        }
    }
    let n = (worst / voxel_size).ceil();
    if n.is_nan() || n < 1.0 {
        1
    } else {
        (n as usize).min(MAX_AUTO_SUBSTEPS)
    }
}

#[cfg(test)]
#[path = "objective_tests.rs"]
mod tests;
