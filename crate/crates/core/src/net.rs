//! Fully connected warm-start regressor with dense skip connections.
//!
//! Each block is a short stack of tapered dense layers whose output is
//! concatenated to the block input; a linear layer maps the final
//! concatenation to the path deviation from the straight line.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bps::{BasisPointSet, BpsFeatures};
use crate::error::{config_err, Error, Result};
use crate::multistart::{straight_line_guess, MotionTask};
use crate::objective::Path;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Elu,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Elu => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Elu),
            _ => Err(Error::Format(format!("unknown activation {c}"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    /// Derivative given pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Hidden widths per block, e.g. `[[512, 256], [256, 128], [128, 64]]`.
    pub blocks: Vec<Vec<usize>>,
    pub activation: Activation,
    pub init_seed: u64,
    /// Start with an all-zero output layer.
    #[serde(default)]
    pub zero_output: bool,
    /// Scale of the initial output-layer weights relative to Glorot.
    #[serde(default = "default_output_scale")]
    pub output_scale: f64,
}

fn default_output_scale() -> f64 {
    0.1
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            blocks: vec![vec![512, 256], vec![256, 128], vec![128, 64]],
            activation: Activation::Relu,
            init_seed: 0,
            zero_output: false,
            output_scale: default_output_scale(),
        }
    }
}

/// Dense layer `y = x · W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    /// Hidden widths per block.
    pub blocks: Vec<Vec<usize>>,
    /// Hidden layers block by block, then the output layer.
    pub layers: Vec<Dense>,
}

struct Cache {
    block_inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    final_input: Array2<f64>,
}

impl Mlp {
    pub fn new(input_width: usize, output_width: usize, config: &MlpConfig) -> Result<Self> {
        if input_width == 0 || output_width == 0 {
            return config_err("network widths must be positive");
        }
        if config.blocks.iter().flatten().any(|&w| w == 0) {
            return config_err("hidden widths must be positive");
        }
        for (b, block) in config.blocks.iter().enumerate() {
            if block.is_empty() {
                return config_err(format!("block {b} has no layers"));
            }
            if block.windows(2).any(|w| w[1] > w[0]) {
                return config_err(format!("block {b} widths must taper"));
            }
        }
        let mut rng = rng::stream(config.init_seed, &[0x6e6e]);
        let mut layers = Vec::new();
        let mut width = input_width;
        for block in &config.blocks {
            let mut fan_in = width;
            for &fan_out in block {
                let mut layer = Dense::zeros(fan_in, fan_out);
                // He-uniform for ReLU-like units, Glorot otherwise.
                let bound = match config.activation {
                    Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                    _ => (6.0 / fan_in as f64).sqrt(),
                };
                layer.w.mapv_inplace(|_| rng.random_range(-bound..bound));
                layers.push(layer);
                fan_in = fan_out;
            }
            width += block.last().copied().unwrap_or(0);
        }
        let mut out = Dense::zeros(width, output_width);
        if !config.zero_output {
            let bound = config.output_scale * (6.0 / (width + output_width) as f64).sqrt();
            if bound > 0.0 {
                out.w.mapv_inplace(|_| rng.random_range(-bound..bound));
            }
        }
        layers.push(out);
        Ok(Self {
            input_width,
            output_width,
            activation: config.activation,
            blocks: config.blocks.clone(),
            layers,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = *it.next().unwrap());
        }
        Ok(())
    }

    /// Rounds all weights to single precision, the checkpoint resolution.
    pub fn round_to_f32(&mut self) {
        for l in &mut self.layers {
            l.w.mapv_inplace(|v| v as f32 as f64);
            l.b.mapv_inplace(|v| v as f32 as f64);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: input.len(),
            });
        }
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row shape");
        Ok(self.forward_batch(&x)?.row(0).to_vec())
    }

    /// Row-wise forward pass over a batch.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: x.ncols(),
            });
        }
        Ok(self.run(x, false).0)
    }

    fn run(&self, x: &Array2<f64>, keep: bool) -> (Array2<f64>, Option<Cache>) {
        let act = self.activation;
        let mut cache = keep.then(|| Cache {
            block_inputs: Vec::new(),
            pre: Vec::new(),
            post: Vec::new(),
            final_input: Array2::zeros((0, 0)),
        });
        let mut current = x.clone();
        let mut li = 0;
        for block in &self.blocks {
            let mut h = current.clone();
            for _ in block {
                let layer = &self.layers[li];
                let z = h.dot(&layer.w) + &layer.b;
                let a = z.mapv(|v| act.apply(v));
                if let Some(c) = cache.as_mut() {
                    c.pre.push(z);
                    c.post.push(a.clone());
                }
                h = a;
                li += 1;
            }
            let next = concatenate![Axis(1), current, h];
            if let Some(c) = cache.as_mut() {
                c.block_inputs.push(current);
            }
            current = next;
        }
        let out_layer = &self.layers[li];
        let y = current.dot(&out_layer.w) + &out_layer.b;
        if let Some(c) = cache.as_mut() {
            c.final_input = current;
        }
        (y, cache)
    }

    /// Weighted squared error `Σ_i w_i · mean_k (y_ik − t_ik)²` and its
    /// gradient with respect to every layer.
    pub fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        targets: &Array2<f64>,
        weights: &[f64],
    ) -> Result<(f64, Vec<Dense>)> {
        if x.nrows() != targets.nrows() || weights.len() != x.nrows() {
            return config_err("batch inputs, targets and weights disagree in length");
        }
        if targets.ncols() != self.output_width {
            return Err(Error::Dimension {
                expected: self.output_width,
                got: targets.ncols(),
            });
        }
        let (y, cache) = self.run(x, true);
        let cache = cache.expect("cache requested");
        let m = self.output_width as f64;
        let mut diff = y - targets;
        let mut loss = 0.0;
        for (mut row, &w) in diff.rows_mut().into_iter().zip(weights) {
            loss += w * row.iter().map(|v| v * v).sum::<f64>() / m;
            row.mapv_inplace(|v| 2.0 * w * v / m);
        }
        let dy = diff;

        let act = self.activation;
        let mut grads: Vec<Dense> = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
            .collect();
        let last = self.layers.len() - 1;
        grads[last].w = cache.final_input.t().dot(&dy);
        grads[last].b = dy.sum_axis(Axis(0));
        let mut dx = dy.dot(&self.layers[last].w.t());

        let mut li = last;
        for (bi, block) in self.blocks.iter().enumerate().rev() {
            let xin = &cache.block_inputs[bi];
            let in_w = xin.ncols();
            let direct = dx.slice(s![.., ..in_w]).to_owned();
            let mut dh = dx.slice(s![.., in_w..]).to_owned();
            for k in (0..block.len()).rev() {
                li -= 1;
                let z = &cache.pre[li];
                let a = &cache.post[li];
                let mut dz = dh;
                ndarray::Zip::from(&mut dz)
                    .and(z)
                    .and(a)
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
                let input = if k == 0 { xin } else { &cache.post[li - 1] };
                grads[li].w = input.t().dot(&dz);
                grads[li].b = dz.sum_axis(Axis(0));
                dh = dz.dot(&self.layers[li].w.t());
            }
            dx = direct + dh;
        }
        Ok((loss, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Learning rate at the last epoch relative to the first (cosine
    /// schedule); 1 keeps it constant.
    #[serde(default = "default_lr_final")]
    pub lr_final_fraction: f64,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Sgd
}

fn default_lr_final() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 100,
            shuffle_seed: 0,
            optimizer: OptimizerKind::Sgd,
            lr_final_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config_err("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return config_err("batch_size and epochs must be positive");
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return config_err("lr_final_fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

/// Mini-batch training on the weighted squared error. Returns the mean
/// per-sample loss of every epoch.
pub fn train(
    net: &mut Mlp,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    weights: Option<&[f64]>,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return config_err("training set is empty");
    }
    if targets.nrows() != n {
        return config_err("inputs and targets disagree in length");
    }
    let uniform = vec![1.0; n];
    let weights = weights.unwrap_or(&uniform);
    if weights.len() != n {
        return config_err("sample weight count does not match the dataset");
    }
    let zeros = || -> Vec<Dense> {
        net.layers
            .iter()
            .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
            .collect()
    };
    let mut adam = Adam {
        m: zeros(),
        v: zeros(),
        t: 0,
    };
    let (beta1, beta2, adam_eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let progress = if config.epochs > 1 {
            epoch as f64 / (config.epochs - 1) as f64
        } else {
            0.0
        };
        let f = config.lr_final_fraction;
        let lr = config.learning_rate
            * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut r = rng::stream(config.shuffle_seed, &[epoch as u64]);
        order.shuffle(&mut r);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = inputs.select(Axis(0), batch);
            let yb = targets.select(Axis(0), batch);
            let wb: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
            let (loss, grads) = net.loss_and_gradients(&xb, &yb, &wb)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss in epoch {epoch} (learning rate too large?)"
                )));
            }
            epoch_loss += loss;
            let scale = 1.0 / batch.len() as f64;
            match config.optimizer {
                OptimizerKind::Sgd => {
                    for (l, g) in net.layers.iter_mut().zip(&grads) {
                        l.w.scaled_add(-lr * scale, &g.w);
                        l.b.scaled_add(-lr * scale, &g.b);
                    }
                }
                OptimizerKind::Adam => {
                    adam.t += 1;
                    let c1 = 1.0 - beta1.powi(adam.t);
                    let c2 = 1.0 - beta2.powi(adam.t);
                    for (((l, g), m), v) in net
                        .layers
                        .iter_mut()
                        .zip(&grads)
                        .zip(adam.m.iter_mut())
                        .zip(adam.v.iter_mut())
                    {
                        let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                            let g = g * scale;
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + adam_eps);
                        };
                        ndarray::Zip::from(&mut l.w)
                            .and(&g.w)
                            .and(&mut m.w)
                            .and(&mut v.w)
                            .for_each(|p, &g, m, v| step(p, g, m, v));
                        ndarray::Zip::from(&mut l.b)
                            .and(&g.b)
                            .and(&mut m.b)
                            .and(&mut v.b)
                            .for_each(|p, &g, m, v| step(p, g, m, v));
                    }
                }
            }
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

/// Free waypoints minus the straight line between the endpoints,
/// `(N_t − 2) × n_dof`.
pub fn path_to_delta(path: &Path) -> Result<Array2<f64>> {
    let n_t = path.n_t();
    let task = MotionTask {
        world: 0,
        q_start: path.row(0),
        q_goal: path.row(n_t - 1),
    };
    let straight = straight_line_guess(&task, n_t)?;
    Ok(&path.waypoints.slice(s![1..n_t - 1, ..]) - &straight.waypoints.slice(s![1..n_t - 1, ..]))
}

/// Inverse of [`path_to_delta`].
pub fn delta_to_path(delta: &Array2<f64>, q_start: &[f64], q_goal: &[f64], n_t: usize) -> Result<Path> {
    if delta.nrows() != n_t - 2 || delta.ncols() != q_start.len() {
        return Err(Error::Dimension {
            expected: (n_t - 2) * q_start.len(),
            got: delta.len(),
        });
    }
    let task = MotionTask {
        world: 0,
        q_start: q_start.to_vec(),
        q_goal: q_goal.to_vec(),
    };
    let mut path = straight_line_guess(&task, n_t)?;
    let mut inner = path.waypoints.slice_mut(s![1..n_t - 1, ..]);
    inner += delta;
    Ok(path)
}

/// A trained network bundled with the basis points and the normalization it
/// was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStartModel {
    pub net: Mlp,
    pub bps: BasisPointSet,
    pub robot_name: String,
    /// Feature scale (the robot reach).
    pub reach: f64,
    pub limits: Vec<[f64; 2]>,
    pub n_t: usize,
}

impl WarmStartModel {
    pub fn new(
        config: &MlpConfig,
        bps: BasisPointSet,
        robot_name: impl Into<String>,
        reach: f64,
        limits: Vec<[f64; 2]>,
        n_t: usize,
    ) -> Result<Self> {
        let n_dof = limits.len();
        let net = Mlp::new(bps.len() + 2 * n_dof, (n_t - 2) * n_dof, config)?;
        Ok(Self {
            net,
            bps,
            robot_name: robot_name.into(),
            reach,
            limits,
            n_t,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.limits.len()
    }

    pub fn normalize_joints(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.limits)
            .map(|(v, l)| 2.0 * (v - l[0]) / (l[1] - l[0]) - 1.0)
            .collect()
    }

    /// `[features / reach ‖ q_start ‖ q_goal]`, all in [-1, 1].
    pub fn input_vector(&self, features: &BpsFeatures, task: &MotionTask) -> Vec<f64> {
        let mut x = features.normalized(self.reach);
        x.extend(self.normalize_joints(&task.q_start));
        x.extend(self.normalize_joints(&task.q_goal));
        x
    }

    pub fn output_to_path(&self, output: &[f64], task: &MotionTask) -> Result<Path> {
        let expected = (self.n_t - 2) * self.n_dof();
        if output.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: output.len(),
            });
        }
        let delta = Array2::from_shape_vec((self.n_t - 2, self.n_dof()), output.to_vec())
            .expect("length checked");
        let mut path = delta_to_path(&delta, &task.q_start, &task.q_goal, self.n_t)?;
        for t in 1..self.n_t - 1 {
            for (j, l) in self.limits.iter().enumerate() {
                let v = &mut path.waypoints[[t, j]];
                *v = v.clamp(l[0], l[1]);
            }
        }
        Ok(path)
    }

    pub fn predict_path(&self, features: &BpsFeatures, task: &MotionTask) -> Result<Path> {
        if features.values.len() != self.bps.len() {
            return Err(Error::Dimension {
                expected: self.bps.len(),
                got: features.values.len(),
            });
        }
        let out = self.net.forward(&self.input_vector(features, task))?;
        self.output_to_path(&out, task)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let net = &self.net;
        w.write_all(b"BPN1")?;
        w.write_u32::<LittleEndian>(net.input_width as u32)?;
        w.write_u32::<LittleEndian>(net.output_width as u32)?;
        w.write_u8(net.activation.code())?;
        w.write_u32::<LittleEndian>(net.blocks.len() as u32)?;
        for block in &net.blocks {
            w.write_u32::<LittleEndian>(block.len() as u32)?;
            for &width in block {
                w.write_u32::<LittleEndian>(width as u32)?;
            }
        }
        let params = net.params_flat();
        w.write_u32::<LittleEndian>(params.len() as u32)?;
        for p in params {
            w.write_f32::<LittleEndian>(p as f32)?;
        }
        let mut bps = Vec::new();
        self.bps.write_to(&mut bps)?;
        w.write_u32::<LittleEndian>(bps.len() as u32)?;
        w.write_all(&bps)?;
        w.write_u32::<LittleEndian>(self.robot_name.len() as u32)?;
        w.write_all(self.robot_name.as_bytes())?;
        w.write_f64::<LittleEndian>(self.reach)?;
        w.write_u32::<LittleEndian>(self.limits.len() as u32)?;
        for l in &self.limits {
            w.write_f64::<LittleEndian>(l[0])?;
            w.write_f64::<LittleEndian>(l[1])?;
        }
        w.write_u32::<LittleEndian>(self.n_t as u32)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"BPN1" {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let input_width = r.read_u32::<LittleEndian>()? as usize;
        let output_width = r.read_u32::<LittleEndian>()? as usize;
        let activation = Activation::from_code(r.read_u8()?)?;
        let n_blocks = r.read_u32::<LittleEndian>()? as usize;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let n = r.read_u32::<LittleEndian>()? as usize;
            blocks.push(
                (0..n)
                    .map(|_| r.read_u32::<LittleEndian>().map(|v| v as usize))
                    .collect::<std::io::Result<Vec<_>>>()?,
            );
        }
        let config = MlpConfig {
            blocks,
            activation,
            init_seed: 0,
            zero_output: true,
            output_scale: 0.0,
        };
        let mut net = Mlp::new(input_width, output_width, &config)
            .map_err(|e| Error::Format(format!("architecture: {e}")))?;
        let n_params = r.read_u32::<LittleEndian>()? as usize;
        if n_params != net.n_params() {
            return Err(Error::Format(format!(
                "checkpoint has {n_params} weights, architecture needs {}",
                net.n_params()
            )));
        }
        let mut raw = vec![0f32; n_params];
        r.read_f32_into::<LittleEndian>(&mut raw)?;
        let params: Vec<f64> = raw.into_iter().map(f64::from).collect();
        net.set_params_flat(&params)?;
        let bps_len = r.read_u32::<LittleEndian>()? as usize;
        let mut bps_bytes = vec![0u8; bps_len];
        r.read_exact(&mut bps_bytes)?;
        let bps = BasisPointSet::read_from(&mut bps_bytes.as_slice())?;
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let robot_name =
            String::from_utf8(name).map_err(|_| Error::Format("robot name is not UTF-8".into()))?;
        let reach = r.read_f64::<LittleEndian>()?;
        let n_dof = r.read_u32::<LittleEndian>()? as usize;
        let limits = (0..n_dof)
            .map(|_| Ok([r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?]))
            .collect::<std::io::Result<Vec<_>>>()?;
        let n_t = r.read_u32::<LittleEndian>()? as usize;
        if input_width != bps.len() + 2 * n_dof || output_width != n_dof * n_t.saturating_sub(2) {
            return Err(Error::Format(
                "checkpoint widths disagree with its BPS and robot".into(),
            ));
        }
        Ok(Self {
            net,
            bps,
            robot_name,
            reach,
            limits,
            n_t,
        })
    }
}

#[cfg(test)]
#[path = "net_tests.rs"]
mod tests;
