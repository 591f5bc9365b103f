//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use bpsplan::dataset::{boost_weights, clean, extend, verify, Split};
use bpsplan::multistart::required_starts;
use bpsplan::robot::RobotModel;
use clap::{Args, Parser, Subcommand};

use crate::bench::{read_rows, report_from_rows, run_benchmark, write_aggregates, write_report};
use crate::config::{Config, WorldsConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::run_pipeline;
use crate::stages::{
    augment, build_worlds, csv_header, fit, generate_dataset, network_first_feasible, new_model, phi,
    read_dataset, read_model, usable_worlds, write_dataset, write_model, write_run_record, write_text,
    write_world,
};
use crate::study::{run_bps_size_study, write_study};

#[derive(Parser, Debug)]
#[command(name = "bpsplan", version, about = "Motion planning with learned warm starts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set solver.descent.alpha=0.002`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<(Config, RobotModel)> {
        let (config, base) = Config::load(&self.config, &self.overrides)?;
        let robot = config.robot(&base)?;
        Ok((config, robot))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate usable noise worlds as world files.
    Worldgen(WorldgenArgs),
    /// Build and refine datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a warm-start network on the train split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Network warm-start feasibility on the test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Per-task CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Straight line vs. random multi-starts vs. network on the test split.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Network feasibility as a function of the basis point count.
    BpsStudy {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute bench tables and figures from the per-task rows.
    Plot {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory written by `bench`.
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage end to end, ending with the benchmark.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random starts needed to succeed with the given confidence.
    RequiredStarts {
        /// Per-start success probability.
        #[arg(long)]
        success: f64,
        #[arg(long)]
        confidence: f64,
    },
}

#[derive(Args, Debug)]
struct WorldgenArgs {
    /// Takes world parameters and the robot from `[worlds]`; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE", requires = "config")]
    overrides: Vec<String>,
    /// Robot used by the usability filter when no config is given.
    #[arg(long)]
    robot: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    frequency: Option<f64>,
    /// Grid shape, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// World table plus hard train and test samples.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add reversed and rotated copies of the train samples.
    Augment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace labels by better refined predictions.
    Clean {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Store per-sample hardness for weighted training.
    Boost {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label new tasks the network cannot solve yet.
    Extend {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every sample invariant; exits 2 naming the first bad sample.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        /// Supplies the robot and the solver for the objective and `--hard` checks.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE", requires = "config")]
        overrides: Vec<String>,
        /// Robot name or file when no config is given.
        #[arg(long)]
        robot: Option<String>,
        /// Also require every test task to defeat straight-line descent.
        #[arg(long, requires = "config")]
        hard: bool,
    },
    /// Sample and world counts.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Worldgen(args) => worldgen(args),
        Command::Dataset(d) => dataset(d),
        Command::Train { cfg, dataset, out } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let mut model = new_model(&config, &robot, config.model.bps_points)?;
            let history = fit(&config, &mut model, &ds, &worlds, config.train.epochs)?;
            write_model(&out, &model)?;
            write_run_record(&out, &config, "train")?;
            let mut csv = csv_header(&config, "train");
            csv.push_str("epoch,loss\n");
            for (e, l) in history.iter().enumerate() {
                csv.push_str(&format!("{e},{l:.8e}\n"));
            }
            write_text(&sibling(&out, ".loss.csv"), &csv)?;
            log(&format!("trained {} epochs, final loss {:.6}", history.len(), history.last().unwrap()));
            Ok(())
        }
        Command::Eval {
            cfg,
            dataset,
            checkpoint,
            out,
        } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let model = read_model(&checkpoint)?;
            let budget = config.bench.budget;
            let rows = network_first_feasible(&config.solver, &robot, &ds, &worlds, &model, budget)?;
            let mut csv = csv_header(&config, "eval");
            csv.push_str("sample,world,network_first_feasible\n");
            for (i, f) in &rows {
                let f = f.map(|k| k.to_string()).unwrap_or_default();
                csv.push_str(&format!("{i},{},{f}\n", ds.samples[*i].task.world));
            }
            write_text(&out, &csv)?;
            let first: Vec<Option<usize>> = rows.iter().map(|r| r.1).collect();
            for b in [0, 5, 10, 20, budget] {
                if b <= budget {
                    println!("phi({b}) = {:.4}", phi(&first, b));
                }
            }
            Ok(())
        }
        Command::Bench {
            cfg,
            dataset,
            checkpoint,
            out,
        } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let model = read_model(&checkpoint)?;
            let report = run_benchmark(&config, &robot, &ds, &worlds, &model)?;
            write_report(&out, &config, &report)?;
            let c = &report.curves;
            let b = report.budget;
            println!(
                "phi({b}): straight {:.3}, multi-start average {:.3}, best {:.3}, network {:.3}",
                c.straight[b], c.average[b], c.best[b], c.network[b]
            );
            println!("network wall time per task: {:.4} s", report.network_seconds);
            Ok(())
        }
        Command::BpsStudy { cfg, dataset, out } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let rows = run_bps_size_study(&config, &robot, &ds, &worlds)?;
            write_study(&out, &config, &rows)?;
            for r in &rows {
                println!("{:5} points: phi {:.3}", r.points, r.phi);
            }
            Ok(())
        }
        Command::Plot { cfg, bench, out } => {
            let (config, _) = cfg.load()?;
            let rows = read_rows(&bench)?;
            let report = report_from_rows(rows, config.bench.budget, config.bench.histogram_bins, 0.0);
            write_aggregates(&out, &csv_header(&config, "bench"), &report)
        }
        Command::Pipeline { cfg, out } => {
            let (config, robot) = cfg.load()?;
            let outcome = run_pipeline(&config, &robot, &out, &mut |m| log(m))?;
            let c = &outcome.bench.curves;
            let b = outcome.bench.budget;
            println!(
                "phi({b}): straight {:.3}, multi-start average {:.3}, best {:.3}, network {:.3}",
                c.straight[b], c.average[b], c.best[b], c.network[b]
            );
            Ok(())
        }
        Command::RequiredStarts { success, confidence } => {
            println!("{}", required_starts(success, confidence)?);
            Ok(())
        }
    }
}

/// `path` with `suffix` appended to its file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn worldgen(args: WorldgenArgs) -> CliResult<()> {
    let (mut worlds, robot, header) = match &args.config {
        Some(path) => {
            let (config, base) = Config::load(path, &args.overrides)?;
            let robot = config.robot(&base)?;
            let header = csv_header(&config, "worldgen");
            (config.worlds.clone(), robot, Some(header))
        }
        None => {
            let missing = |what: &str| CliError::Usage(format!("worldgen without --config needs --{what}"));
            let worlds = WorldsConfig {
                first_seed: args.seed.ok_or_else(|| missing("seed"))?,
                train: args.count.ok_or_else(|| missing("count"))?,
                test: 0,
                noise_frequency: args.frequency.ok_or_else(|| missing("frequency"))?,
                threshold: args.threshold.ok_or_else(|| missing("threshold"))?,
                shape: args.shape.clone().unwrap_or_else(|| vec![64, 64]),
                voxel_size: args.voxel_size.unwrap_or(1.0 / 64.0),
                max_seeds: 1_000_000,
            };
            let robot = RobotModel::by_name_or_path(args.robot.as_deref().unwrap_or("sphere_bot"))?;
            (worlds, robot, None)
        }
    };
    if let Some(s) = args.seed {
        worlds.first_seed = s;
    }
    if let Some(v) = args.threshold {
        worlds.threshold = v;
    }
    if let Some(v) = args.frequency {
        worlds.noise_frequency = v;
    }
    if let Some(v) = &args.shape {
        worlds.shape = v.clone();
    }
    if let Some(v) = args.voxel_size {
        worlds.voxel_size = v;
    }
    let count = args.count.unwrap_or(worlds.train + worlds.test);
    worlds.spec(worlds.first_seed).validate()?;
    let found = usable_worlds(&worlds, &robot, count)?;
    let mut csv = header.unwrap_or_default();
    csv.push_str(&format!(
        "# worlds first_seed={} frequency={} threshold={} shape={:?} voxel_size={} robot={}\n",
        worlds.first_seed, worlds.noise_frequency, worlds.threshold, worlds.shape, worlds.voxel_size, robot.name
    ));
    csv.push_str("seed,obstacle_fraction,file\n");
    for (seed, world) in &found {
        let file = format!("world_{seed:06}.bpw");
        write_world(&args.out.join(&file), world)?;
        csv.push_str(&format!("{seed},{:.6},{file}\n", world.grid.obstacle_fraction()));
    }
    write_text(&args.out.join("worlds.csv"), &csv)?;
    log(&format!("wrote {} worlds to {}", found.len(), args.out.display()));
    Ok(())
}

fn dataset(command: DatasetCommand) -> CliResult<()> {
    match command {
        DatasetCommand::Gen { cfg, out } => {
            let (config, robot) = cfg.load()?;
            let g = generate_dataset(&config, &robot)?;
            write_dataset(&out, &g.dataset)?;
            write_run_record(&out, &config, "dataset gen")?;
            log(&format!("train {:?}\ntest {:?}", g.train_report, g.test_report));
            Ok(())
        }
        DatasetCommand::Augment { cfg, dataset, out } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let aug = augment(&config, &robot, &ds)?;
            write_dataset(&out, &aug)?;
            write_run_record(&out, &config, "dataset augment")
        }
        DatasetCommand::Clean {
            cfg,
            dataset,
            checkpoint,
            out,
        } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let model = read_model(&checkpoint)?;
            let (c, report) = clean(&ds, &worlds, &robot, &model, &config.solver)?;
            write_dataset(&out, &c)?;
            write_run_record(&out, &config, "dataset clean")?;
            log(&format!("{report:?}"));
            Ok(())
        }
        DatasetCommand::Boost {
            cfg,
            dataset,
            checkpoint,
            out,
        } => {
            let (config, robot) = cfg.load()?;
            let mut ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let model = read_model(&checkpoint)?;
            let w = boost_weights(&mut ds, &worlds, &robot, &model, &config.solver, &config.refine.boost)?;
            write_dataset(&out, &ds)?;
            write_run_record(&out, &config, "dataset boost")?;
            let max = w.iter().copied().fold(0.0, f64::max);
            log(&format!("largest sample weight {max:.3}"));
            Ok(())
        }
        DatasetCommand::Extend {
            cfg,
            dataset,
            checkpoint,
            out,
        } => {
            let (config, robot) = cfg.load()?;
            let ds = read_dataset(&dataset)?;
            let worlds = build_worlds(&ds)?;
            let model = read_model(&checkpoint)?;
            let (e, report) = extend(&ds, &worlds, &robot, &model, &config.solver, &config.refine.extend)?;
            write_dataset(&out, &e)?;
            write_run_record(&out, &config, "dataset extend")?;
            log(&format!("{report:?}"));
            Ok(())
        }
        DatasetCommand::Verify {
            dataset,
            config,
            overrides,
            robot,
            hard,
        } => {
            let ds = read_dataset(&dataset)?;
            let (robot, solver) = match (&config, robot) {
                (Some(path), None) => {
                    let (c, base) = Config::load(path, &overrides)?;
                    (c.robot(&base)?, Some(c.solver))
                }
                (None, Some(r)) => (RobotModel::by_name_or_path(&r)?, None),
                (None, None) => (RobotModel::by_name_or_path(&ds.robot_name)?, None),
                (Some(_), Some(_)) => {
                    return Err(CliError::Usage("give either --config or --robot".into()))
                }
            };
            let worlds = build_worlds(&ds)?;
            verify(&ds, &worlds, &robot, solver.as_ref(), hard).map_err(|e| CliError::Data(e.to_string()))?;
            println!("ok: {} samples", ds.samples.len());
            Ok(())
        }
        DatasetCommand::Stats { dataset, out } => {
            let ds = read_dataset(&dataset)?;
            let st = ds.stats();
            let mut text = format!(
                "robot = \"{}\"\nn_t = {}\ntrain_worlds = {}\ntest_worlds = {}\ntrain_samples = {}\ntest_samples = {}\n",
                ds.robot_name, ds.n_t, st.train_worlds, st.test_worlds, st.train_samples, st.test_samples
            );
            for (p, n) in bpsplan::dataset::Provenance::ALL.iter().zip(st.by_provenance) {
                text.push_str(&format!("{} = {n}\n", p.name()));
            }
            text.push_str(&format!(
                "mean_label_objective = {:.9}\nmean_train_label_objective = {:.9}\n",
                st.mean_label_objective, st.mean_train_label_objective
            ));
            let _ = Split::Train;
            print!("{text}");
            if let Some(out) = out {
                write_text(&out, &text)?;
            }
            Ok(())
        }
    }
}
