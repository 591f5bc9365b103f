use proptest::prelude::*;

use super::*;
use crate::multistart::{straight_line_guess, MotionTask};
use crate::objective::{length_cost, substep_configs};
use crate::rng;
use crate::test_support::{block_sdf, corner_scenario, free_sdf, noise_world, random_path, VOXEL};

fn obj() -> ObjectiveParams {
    ObjectiveParams::for_voxel(VOXEL)
}

/// Smallest world or self clearance over the substep samples.
fn min_clearance(path: &Path, robot: &RobotModel, sdf: &SignedDistanceField, n_sub: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for q in substep_configs(path, n_sub) {
        let placed = robot.sphere_centers(&q).unwrap();
        for (p, s) in placed.iter().zip(&robot.spheres) {
            worst = worst.min(sdf.lookup(p.center.as_slice()) - s.radius - robot.margin);
        }
        for &(a, b) in &robot.self_pairs {
            for k in robot.frame_sphere_range(a) {
                for l in robot.frame_sphere_range(b) {
                    let d = (placed[k].center - placed[l].center).norm()
                        - robot.spheres[k].radius
                        - robot.spheres[l].radius
                        - robot.margin;
                    worst = worst.min(d);
                }
            }
        }
    }
    worst
}

#[test]
fn local_minimum_is_left_unchanged() {
    let bot = RobotModel::sphere_bot();
    let task = MotionTask {
        world: 0,
        q_start: vec![-0.3, -0.2],
        q_goal: vec![0.4, 0.1],
    };
    let p = straight_line_guess(&task, 12).unwrap();
    let (out, trace) = descend(&p, &bot, &free_sdf(), &obj(), &DescentParams::default()).unwrap();
    assert_eq!(out, p);
    assert_eq!(trace.updates(), 0);
    assert_eq!(trace.first_feasible, Some(0));
}

#[test]
fn pure_length_cost_straightens_a_bent_path() {
    let bot = RobotModel::sphere_bot();
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|t| {
            let s = t as f64 / 9.0;
            vec![-0.4 + 0.8 * s, 0.3 * (std::f64::consts::PI * s).sin()]
        })
        .collect();
    let p = Path::from_rows(&rows).unwrap();
    let params = ObjectiveParams {
        lambda: 1.0,
        ..obj()
    };
    let descent = DescentParams {
        alpha: 0.01,
        max_iters: 5000,
        converge_tol: 1e-9,
        n_sub: SubstepPolicy::Fixed(1),
    };
    assert!(length_cost(&p).unwrap() > 1.1);
    let (out, trace) = descend(&p, &bot, &free_sdf(), &params, &descent).unwrap();
    assert!((length_cost(&out).unwrap() - 1.0).abs() < 1e-3);
    assert!(trace.updates() < 5000);
    assert_eq!(out.start(), p.start());
    assert_eq!(out.goal(), p.goal());
}

#[test]
fn hard_task_trace_regression() {
    let bot = RobotModel::sphere_bot();
    let world = noise_world(7);
    let mut r = rng::stream(REGRESSION_TASK_SEED, &[]);
    let task = loop {
        let a = bot.random_config(&mut r);
        let b = bot.random_config(&mut r);
        if !(bot.is_config_feasible(&world.sdf, &a) && bot.is_config_feasible(&world.sdf, &b)) {
            continue;
        }
        let t = MotionTask {
            world: 0,
            q_start: a,
            q_goal: b,
        };
        if !is_path_feasible(&straight_line_guess(&t, 20).unwrap(), &bot, &world.sdf) {
            break t;
        }
    };
    let p = straight_line_guess(&task, 20).unwrap();
    let descent = DescentParams::default().with_max_iters(300);
    let (_, trace) = descend(&p, &bot, &world.sdf, &obj(), &descent).unwrap();
    assert_eq!(trace.objective.len(), trace.updates() + 1);
    assert_eq!(trace.first_feasible, REGRESSION_FIRST_FEASIBLE);
    let again = descend(&p, &bot, &world.sdf, &obj(), &descent).unwrap().1;
    assert_eq!(again, trace);
}

const REGRESSION_TASK_SEED: u64 = 17;
const REGRESSION_FIRST_FEASIBLE: Option<usize> = Some(18);

#[test]
fn feasibility_examples() {
    let bot = RobotModel::sphere_bot();
    let mut r = rng::stream(8, &[]);
    assert!(feasibility_check(&random_path(&bot, 10, 0.1, &mut r), &bot, &free_sdf(), 4));

    let sdf = block_sdf(28, 36);
    let through = Path::from_rows(&[vec![-0.3, 0.0], vec![0.0, 0.0], vec![0.3, 0.0]]).unwrap();
    assert!(!feasibility_check(&through, &bot, &sdf, 1));

    let (sdf, corner) = corner_scenario();
    assert!(feasibility_check(&corner, &bot, &sdf, 1));
    assert!(!feasibility_check(&corner, &bot, &sdf, 10));
    let auto = choose_n_sub(&corner, &bot, VOXEL);
    assert!(auto >= 10);
    assert!(!feasibility_check(&corner, &bot, &sdf, auto));
    assert!(!is_path_feasible(&corner, &bot, &sdf));
}

#[test]
fn arm_self_collision_is_infeasible() {
    let arm = RobotModel::planar_arm4();
    let folded = Path::from_rows(&[vec![0.0; 4], vec![0.0, 2.5, 2.5, 0.0], vec![0.5, 0.0, 0.0, 0.0]]).unwrap();
    assert!(!feasibility_check(&folded, &arm, &free_sdf(), 1));
}

#[test]
fn non_finite_paths_abort() {
    let bot = RobotModel::sphere_bot();
    let mut p = Path::from_rows(&[vec![-0.3, 0.0], vec![0.0, 0.0], vec![0.3, 0.0]]).unwrap();
    p.waypoints[[1, 0]] = f64::NAN;
    let res = descend(&p, &bot, &free_sdf(), &obj(), &DescentParams::default());
    assert!(matches!(res, Err(Error::Numeric(_))));
    let bad = DescentParams {
        alpha: 0.0,
        ..DescentParams::default()
    };
    assert!(matches!(descend(&p, &bot, &free_sdf(), &obj(), &bad), Err(Error::Config(_))));
}

#[test]
fn trace_budget_lookup() {
    let trace = DescentTrace {
        objective: vec![3.0, 2.0, 1.0],
        feasible: vec![false, true, true],
        first_feasible: Some(1),
    };
    assert_eq!(trace.updates(), 2);
    assert!(!trace.feasible_at(0));
    assert!(trace.feasible_at(1));
    assert!(trace.feasible_at(50));
    assert!(!DescentTrace::default().feasible_at(3));
    assert!(!trace.solved_within(0));
    assert!(trace.solved_within(1));
    assert!(trace.solved_within(7));
    let lapsed = DescentTrace {
        objective: vec![3.0, 2.0, 1.0],
        feasible: vec![false, true, false],
        first_feasible: Some(1),
    };
    assert!(!lapsed.feasible_at(2));
    assert!(lapsed.solved_within(2));
}

#[test]
fn substep_policy_parses_counts_and_auto() {
    #[derive(serde::Deserialize)]
    struct Wrap {
        n: SubstepPolicy,
    }
    let fixed: Wrap = toml::from_str("n = 3").unwrap();
    assert_eq!(fixed.n, SubstepPolicy::Fixed(3));
    let auto: Wrap = toml::from_str("n = \"auto\"").unwrap();
    assert_eq!(auto.n, SubstepPolicy::Auto);
    assert!(toml::from_str::<Wrap>("n = 0").is_err());
    assert!(toml::from_str::<Wrap>("n = \"often\"").is_err());
}

#[test]
fn descent_is_mostly_monotone_over_windows() {
    let mut r = rng::stream(60, &[]);
    let mut good = 0;
    let mut total = 0;
    for (robot, noise) in [(RobotModel::sphere_bot(), 0.1), (RobotModel::planar_arm4(), 0.4)] {
        for i in 0..100 {
            let world = noise_world(200 + i);
            let p = random_path(&robot, 16, noise, &mut r);
            let (_, trace) = descend(&p, &robot, &world.sdf, &obj(), &DescentParams::default()).unwrap();
            let u = &trace.objective;
            total += 1;
            if u.windows(11).all(|w| w[10] < w[0]) {
                good += 1;
            }
        }
    }
    assert!(good * 100 >= 95 * total, "{good}/{total} monotone over 10-step windows");
}

#[test]
fn auto_substeps_agree_with_dense_sampling() {
    let mut r = rng::stream(70, &[]);
    let mut disagreements = Vec::new();
    let worlds: Vec<_> = (0..10).map(|i| noise_world(300 + i)).collect();
    for (robot, noise) in [(RobotModel::sphere_bot(), 0.1), (RobotModel::planar_arm4(), 0.4)] {
        for i in 0..100 {
            let sdf = &worlds[i % worlds.len()].sdf;
            let p = random_path(&robot, 12, noise, &mut r);
            let n = choose_n_sub(&p, &robot, VOXEL);
            let coarse = feasibility_check(&p, &robot, sdf, n);
            let dense = feasibility_check(&p, &robot, sdf, 10 * n);
            if coarse != dense {
                disagreements.push(min_clearance(&p, &robot, sdf, 10 * n));
            }
        }
    }
    assert!(disagreements.len() <= 1, "{disagreements:?}");
    for d in disagreements {
        assert!(d.abs() < VOXEL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn endpoints_stay_bit_identical(seed in 0u64..1_000_000, alpha in 1e-4f64..1e-2) {
        let arm = RobotModel::planar_arm4();
        let world = noise_world(seed % 10);
        let p = random_path(&arm, 10, 0.3, &mut rng::stream(seed, &[]));
        let descent = DescentParams { alpha, max_iters: 20, ..DescentParams::default() };
        let (out, trace) = descend(&p, &arm, &world.sdf, &obj(), &descent).unwrap();
        prop_assert_eq!(out.start(), p.start());
        prop_assert_eq!(out.goal(), p.goal());
        prop_assert!(out.waypoints.rows().into_iter().all(|q| arm.within_limits(q.as_slice().unwrap())));
        prop_assert_eq!(trace.feasible.len(), trace.objective.len());
    }
}
