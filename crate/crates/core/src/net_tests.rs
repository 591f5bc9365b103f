use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;
use crate::bps::generate_hex_bps;
use crate::robot::RobotModel;
use crate::rng;

fn tiny(activation: Activation) -> Mlp {
    let cfg = MlpConfig {
        blocks: vec![vec![2]],
        activation,
        init_seed: 0,
        zero_output: true,
        output_scale: 0.0,
    };
    let mut net = Mlp::new(2, 1, &cfg).unwrap();
    // hidden W (2x2, row = input), hidden b, output W (4x1), output b
    net.set_params_flat(&[1.0, -1.0, 2.0, 0.5, 0.5, -1.0, 0.1, -0.2, 0.3, 0.4, 0.05])
        .unwrap();
    net
}

fn random_net(activation: Activation, seed: u64) -> Mlp {
    let cfg = MlpConfig {
        blocks: vec![vec![4, 3], vec![3]],
        activation,
        init_seed: seed,
        zero_output: false,
        output_scale: 1.0,
    };
    Mlp::new(3, 2, &cfg).unwrap()
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, &[]);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
}

#[test]
fn forward_matches_hand_computation() {
    // x = [1, 2]: hidden pre-activation [5.5, -1], output weights act on [x, h].
    let x = [1.0, 2.0];
    let base = 0.1 - 0.4 + 0.05;
    let cases = [
        (Activation::Relu, base + 0.3 * 5.5),
        (Activation::Tanh, base + 0.3 * 5.5f64.tanh() + 0.4 * (-1.0f64).tanh()),
        (Activation::Elu, base + 0.3 * 5.5 + 0.4 * ((-1.0f64).exp() - 1.0)),
    ];
    for (act, expect) in cases {
        let y = tiny(act).forward(&x).unwrap();
        assert!((y[0] - expect).abs() < 1e-14, "{act:?}: {} vs {expect}", y[0]);
    }
    assert!(matches!(tiny(Activation::Relu).forward(&[1.0]), Err(Error::Dimension { .. })));
}

#[test]
fn backprop_matches_finite_differences() {
    let x = random_matrix(3, 3, 1);
    let t = random_matrix(3, 2, 2);
    let w = [1.0, 0.5, 2.0];
    for act in [Activation::Relu, Activation::Tanh, Activation::Elu] {
        let mut net = random_net(act, 5);
        let (_, grads) = net.loss_and_gradients(&x, &t, &w).unwrap();
        let analytic: Vec<f64> = grads
            .iter()
            .flat_map(|g| g.w.iter().chain(g.b.iter()).copied().collect::<Vec<_>>())
            .collect();
        let p0 = net.params_flat();
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(p0.len());
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] = p0[i] + h;
            net.set_params_flat(&p).unwrap();
            let up = net.loss_and_gradients(&x, &t, &w).unwrap().0;
            p[i] = p0[i] - h;
            net.set_params_flat(&p).unwrap();
            let down = net.loss_and_gradients(&x, &t, &w).unwrap().0;
            numeric.push((up - down) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-4, "{act:?}: relative error {}", diff / norm);
    }
}

#[test]
fn batch_forward_matches_rows() {
    let net = random_net(Activation::Tanh, 3);
    let x = random_matrix(5, 3, 4);
    let y = net.forward_batch(&x).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        let single = net.forward(row.as_slice().unwrap()).unwrap();
        for k in 0..2 {
            assert!((single[k] - y[[i, k]]).abs() < 1e-15);
        }
    }
}

#[test]
fn zero_output_layer_gives_zero() {
    let cfg = MlpConfig {
        blocks: vec![vec![8, 4]],
        zero_output: true,
        ..MlpConfig::default()
    };
    let net = Mlp::new(3, 4, &cfg).unwrap();
    let y = net.forward_batch(&random_matrix(6, 3, 9)).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn weight_two_equals_a_duplicated_sample() {
    let net = random_net(Activation::Elu, 8);
    let x = random_matrix(2, 3, 10);
    let t = random_matrix(2, 2, 11);
    let (l1, g1) = net.loss_and_gradients(&x, &t, &[1.0, 2.0]).unwrap();
    let x2 = ndarray::concatenate![Axis(0), x, x.slice(s![1..2, ..])];
    let t2 = ndarray::concatenate![Axis(0), t, t.slice(s![1..2, ..])];
    let (l2, g2) = net.loss_and_gradients(&x2, &t2, &[1.0, 1.0, 1.0]).unwrap();
    assert!((l1 - l2).abs() <= 1e-14 * l1.abs());
    for (a, b) in g1.iter().zip(&g2) {
        for (u, v) in a.w.iter().chain(a.b.iter()).zip(b.w.iter().chain(b.b.iter())) {
            assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
    assert!(net.loss_and_gradients(&x, &t, &[1.0]).is_err());
}

#[test]
fn architecture_is_validated() {
    let bad = |blocks: Vec<Vec<usize>>| {
        let cfg = MlpConfig {
            blocks,
            ..MlpConfig::default()
        };
        Mlp::new(4, 2, &cfg).is_err()
    };
    assert!(bad(vec![vec![4, 8]]));
    assert!(bad(vec![vec![]]));
    assert!(bad(vec![vec![4, 0]]));
    assert!(!bad(vec![vec![8, 8], vec![4]]));
    let net = Mlp::new(4, 2, &MlpConfig {
        blocks: vec![vec![8, 4], vec![4]],
        ..MlpConfig::default()
    })
    .unwrap();
    // 4->8, 8->4, 8->4, then 12->2
    assert_eq!(net.n_params(), 40 + 36 + 36 + 26);
    assert!(matches!(net.clone().set_params_flat(&[0.0; 3]), Err(Error::Dimension { .. })));
}

#[test]
fn single_sample_is_memorized() {
    let cfg = MlpConfig {
        blocks: vec![vec![16]],
        activation: Activation::Tanh,
        init_seed: 1,
        zero_output: false,
        output_scale: 1.0,
    };
    let mut net = Mlp::new(4, 3, &cfg).unwrap();
    let x = array![[0.3, -0.2, 0.9, 0.1]];
    let y = array![[0.5, -0.7, 0.25]];
    let tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 1,
        epochs: 2000,
        optimizer: OptimizerKind::Adam,
        ..TrainConfig::default()
    };
    let history = train(&mut net, &x, &y, None, &tc).unwrap();
    assert_eq!(history.len(), 2000);
    let (loss, _) = net.loss_and_gradients(&x, &y, &[1.0]).unwrap();
    assert!(loss < 1e-6, "loss {loss}");
}

#[test]
fn training_is_deterministic_given_seeds() {
    let x = random_matrix(40, 3, 20);
    let y = random_matrix(40, 2, 21);
    let run = |shuffle_seed| {
        let mut net = random_net(Activation::Relu, 2);
        let tc = TrainConfig {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 5,
            shuffle_seed,
            ..TrainConfig::default()
        };
        let h = train(&mut net, &x, &y, None, &tc).unwrap();
        (net.params_flat(), h)
    };
    let a = run(7);
    assert_eq!(a, run(7));
    assert_ne!(a.0, run(8).0);
    assert!(a.1.last().unwrap() < &a.1[0]);
}

#[test]
fn training_rejects_bad_input() {
    let mut net = random_net(Activation::Relu, 2);
    let x = random_matrix(4, 3, 1);
    let mut y = random_matrix(4, 2, 2);
    let tc = TrainConfig::default();
    assert!(matches!(train(&mut net, &x, &y, Some(&[1.0; 3]), &tc), Err(Error::Config(_))));
    let bad_lr = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&mut net, &x, &y, None, &bad_lr), Err(Error::Config(_))));
    y[[2, 1]] = f64::NAN;
    assert!(matches!(train(&mut net, &x, &y, None, &tc), Err(Error::Numeric(_))));
}

fn sphere_model(zero_output: bool) -> (WarmStartModel, RobotModel) {
    let bot = RobotModel::sphere_bot();
    let bps = generate_hex_bps([0.0; 3], bot.reach, 32, 2).unwrap();
    let cfg = MlpConfig {
        blocks: vec![vec![16, 8]],
        activation: Activation::Relu,
        init_seed: 4,
        zero_output,
        output_scale: 0.1,
    };
    let model = WarmStartModel::new(&cfg, bps, bot.name.clone(), bot.reach, bot.limits(), 12).unwrap();
    (model, bot)
}

fn task() -> MotionTask {
    MotionTask {
        world: 0,
        q_start: vec![-0.35, 0.2],
        q_goal: vec![0.3, -0.4],
    }
}

#[test]
fn straight_line_has_zero_delta() {
    let p = straight_line_guess(&task(), 12).unwrap();
    let d = path_to_delta(&p).unwrap();
    assert_eq!(d.dim(), (10, 2));
    assert!(d.iter().all(|&v| v == 0.0));
    assert_eq!(delta_to_path(&d, &task().q_start, &task().q_goal, 12).unwrap(), p);
    assert!(delta_to_path(&Array2::zeros((9, 2)), &task().q_start, &task().q_goal, 12).is_err());
}

#[test]
fn input_vector_is_normalized() {
    let (model, bot) = sphere_model(true);
    let features = BpsFeatures {
        values: vec![model.reach; 32],
        signed: true,
    };
    let limits = bot.limits();
    let t = MotionTask {
        world: 0,
        q_start: limits.iter().map(|l| l[0]).collect(),
        q_goal: limits.iter().map(|l| l[1]).collect(),
    };
    let x = model.input_vector(&features, &t);
    assert_eq!(x.len(), 32 + 4);
    assert!(x[..32].iter().all(|&v| (v - 1.0).abs() < 1e-12));
    assert_eq!(&x[32..], &[-1.0, -1.0, 1.0, 1.0]);
}

#[test]
fn predictions_keep_endpoints_and_limits() {
    let (model, bot) = sphere_model(true);
    let features = BpsFeatures {
        values: vec![0.1; 32],
        signed: true,
    };
    let p = model.predict_path(&features, &task()).unwrap();
    assert_eq!(p, straight_line_guess(&task(), 12).unwrap());

    let huge = vec![50.0; 20];
    let p = model.output_to_path(&huge, &task()).unwrap();
    assert_eq!(p.row(0), task().q_start);
    assert_eq!(p.row(11), task().q_goal);
    assert!(p.waypoints.rows().into_iter().all(|q| bot.within_limits(q.as_slice().unwrap())));
    assert!(matches!(model.output_to_path(&huge[1..], &task()), Err(Error::Dimension { .. })));
    let short = BpsFeatures {
        values: vec![0.1; 31],
        signed: true,
    };
    assert!(model.predict_path(&short, &task()).is_err());

    let (untrained, _) = sphere_model(false);
    let p = untrained.predict_path(&features, &task()).unwrap();
    assert_eq!(p.row(0), task().q_start);
    assert_eq!(p.row(11), task().q_goal);
    let d = path_to_delta(&p).unwrap();
    assert!(d.iter().any(|&v| v != 0.0));
    assert!(d.iter().all(|v| v.abs() < 0.5));
}

#[test]
fn checkpoint_round_trip() {
    let (mut model, _) = sphere_model(false);
    let mut buf = Vec::new();
    model.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"BPN1");
    let back = WarmStartModel::read_from(&mut buf.as_slice()).unwrap();
    model.net.round_to_f32();
    assert_eq!(back, model);

    let mut bad = buf.clone();
    bad[1] = b'!';
    assert!(matches!(WarmStartModel::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
    assert!(WarmStartModel::read_from(&mut &buf[..buf.len() - 3]).is_err());
    // Shrink the declared input width so the weight count no longer fits.
    let mut bad = buf.clone();
    bad[4] -= 1;
    assert!(matches!(WarmStartModel::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_round_trip(seed in 0u64..1_000_000, n_t in 3usize..30) {
        let bot = RobotModel::planar_arm4();
        let mut r = rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n_t).map(|_| bot.random_config(&mut r)).collect();
        let p = Path::from_rows(&rows).unwrap();
        let back = delta_to_path(&path_to_delta(&p).unwrap(), &rows[0], &rows[n_t - 1], n_t).unwrap();
        prop_assert_eq!(back.start(), p.start());
        prop_assert_eq!(back.goal(), p.goal());
        for (a, b) in back.waypoints.iter().zip(p.waypoints.iter()) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * (1.0 + b.abs()));
        }
    }
}
