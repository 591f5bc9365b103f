//! Shared fixtures for the unit tests.

use ndarray::Array2;
use rand::Rng as _;

use crate::dataset::straight_line_solves;
use crate::multistart::{MotionTask, SolverParams};
use crate::objective::Path;
use crate::rng::{self, Rng};
use crate::robot::RobotModel;
use crate::worldgen::{compute_sdf, GridGeometry, OccupancyGrid, SignedDistanceField, World, WorldSpec};

pub const VOXEL: f64 = 1.0 / 64.0;

pub fn geometry() -> GridGeometry {
    GridGeometry::centered(vec![64, 64], VOXEL).unwrap()
}

pub fn free_sdf() -> SignedDistanceField {
    compute_sdf(&OccupancyGrid::empty(geometry()))
}

/// Square obstacle covering cells `lo..hi` on both axes.
pub fn block_sdf(lo: usize, hi: usize) -> SignedDistanceField {
    let mut grid = OccupancyGrid::empty(geometry());
    for x in lo..hi {
        for y in lo..hi {
            let i = grid.geometry.index(&[x, y]);
            grid.cells[i] = true;
        }
    }
    compute_sdf(&grid)
}

/// Block on `[0, 0.125]²` and a sphere-bot path whose waypoints all keep
/// clear of it while the last segment cuts straight through its corner.
pub fn corner_scenario() -> (SignedDistanceField, Path) {
    let path = Path::from_rows(&[vec![-0.3, 0.36], vec![-0.2, 0.26], vec![0.26, -0.2]]).unwrap();
    (block_sdf(32, 40), path)
}

pub fn noise_world(seed: u64) -> World {
    World::from_spec(&WorldSpec {
        seed,
        noise_frequency: 4.0,
        threshold: 0.3,
        shape: vec![64, 64],
        voxel_size: VOXEL,
        rotation: 0,
    })
    .unwrap()
}

/// Straight line between two random configurations plus bounded uniform
/// noise on the free rows, clamped to the limits.
pub fn random_path(robot: &RobotModel, n_t: usize, noise: f64, rng: &mut Rng) -> Path {
    let a = robot.random_config(rng);
    let b = robot.random_config(rng);
    let limits = robot.limits();
    let n = robot.n_dof();
    let mut w = Array2::zeros((n_t, n));
    for t in 0..n_t {
        let s = t as f64 / (n_t - 1) as f64;
        for j in 0..n {
            let mut v = a[j] + s * (b[j] - a[j]);
            if t > 0 && t < n_t - 1 {
                v += rng.random_range(-noise..=noise);
            }
            w[[t, j]] = v.clamp(limits[j][0], limits[j][1]);
        }
    }
    Path::new(w).unwrap()
}

/// First task drawn from `seed` whose endpoints are feasible but whose
/// straight-line descent fails.
pub fn hard_task(robot: &RobotModel, world: &World, solver: &SolverParams, seed: u64) -> MotionTask {
    let mut r = rng::stream(seed, &[]);
    loop {
        let a = robot.random_config(&mut r);
        let b = robot.random_config(&mut r);
        if !(robot.is_config_feasible(&world.sdf, &a) && robot.is_config_feasible(&world.sdf, &b)) {
            continue;
        }
        let task = MotionTask {
            world: 0,
            q_start: a,
            q_goal: b,
        };
        if !straight_line_solves(&task, robot, &world.sdf, solver).unwrap() {
            return task;
        }
    }
}
