//! Warm-start benchmark: straight line, random multi-starts and the network
//! on every test task, reported as feasibility-vs-iteration curves.
//!
//! A method solves a task within budget `b` when one of its first `b`
//! descent updates (or the initial guess) is feasible, so the curves are
//! non-decreasing in `b`.

use std::path::Path;
use std::time::Instant;

use bpsplan::dataset::{world_features, Dataset, Split};
use bpsplan::multistart::{required_starts, solve_multistart, SolverParams};
use bpsplan::net::WarmStartModel;
use bpsplan::optimizer::descend;
use bpsplan::robot::RobotModel;
use bpsplan::worldgen::World;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::stages::{check_compatible, csv_header, write_text};
use crate::svg;

/// Raw per-task outcome; every reported number is an aggregate of these.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    /// Index into the dataset's samples.
    pub sample: usize,
    pub world: usize,
    pub straight: Option<usize>,
    pub network: Option<usize>,
    /// First feasible iteration of each random start.
    pub starts: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub straight: Vec<f64>,
    pub average: Vec<f64>,
    pub best: Vec<f64>,
    pub network: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<TaskRow>,
    pub budget: usize,
    pub curves: Curves,
    /// Tasks per bin of the random-start feasible fraction at `budget`.
    pub histogram: Vec<(f64, f64, usize)>,
    pub network_mean_iters: Option<f64>,
    pub network_worst_iters: Option<usize>,
    /// Mean seconds per task for prediction plus descent; never written to
    /// files.
    pub network_seconds: f64,
}

fn solved(first: Option<usize>, budget: usize) -> bool {
    first.is_some_and(|k| k <= budget)
}

fn share(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        n as f64 / of as f64
    }
}

pub fn curves(rows: &[TaskRow], budget: usize) -> Curves {
    let n = rows.len();
    let mut c = Curves {
        straight: Vec::with_capacity(budget + 1),
        average: Vec::with_capacity(budget + 1),
        best: Vec::with_capacity(budget + 1),
        network: Vec::with_capacity(budget + 1),
    };
    for b in 0..=budget {
        c.straight.push(share(rows.iter().filter(|r| solved(r.straight, b)).count(), n));
        c.network.push(share(rows.iter().filter(|r| solved(r.network, b)).count(), n));
        c.best.push(share(
            rows.iter().filter(|r| r.starts.iter().any(|&s| solved(s, b))).count(),
            n,
        ));
        let avg: f64 = rows
            .iter()
            .map(|r| share(r.starts.iter().filter(|&&s| solved(s, b)).count(), r.starts.len()))
            .sum();
        c.average.push(if n == 0 { 0.0 } else { avg / n as f64 });
    }
    c
}

pub fn histogram(rows: &[TaskRow], budget: usize, bins: usize) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0usize; bins];
    for r in rows {
        let f = share(r.starts.iter().filter(|&&s| solved(s, budget)).count(), r.starts.len());
        counts[((f * bins as f64) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 / bins as f64, (i + 1) as f64 / bins as f64, c))
        .collect()
}

/// Runs all three initializations on every test task of `ds`.
pub fn run_benchmark(
    config: &Config,
    robot: &RobotModel,
    ds: &Dataset,
    worlds: &[World],
    model: &WarmStartModel,
) -> CliResult<EvalReport> {
    check_compatible(ds, model)?;
    let bench = &config.bench;
    let solver = SolverParams {
        n_starts: bench.n_starts + 1,
        descent: config.solver.descent.with_max_iters(bench.budget),
        ..config.solver.clone()
    };
    let features = world_features(worlds, model);
    let tests: Vec<usize> = (0..ds.samples.len())
        .filter(|&i| ds.split_of(&ds.samples[i]) == Split::Test)
        .collect();
    if tests.is_empty() {
        return Err(CliError::Data("dataset has no test samples".into()));
    }
    let results: Vec<(TaskRow, f64)> = tests
        .par_iter()
        .map(|&i| -> CliResult<_> {
            let s = &ds.samples[i];
            let sdf = &worlds[s.task.world].sdf;
            let multi = solve_multistart(&s.task, robot, sdf, &solver, bench.seed)?;
            let t0 = Instant::now();
            let guess = model.predict_path(&features[s.task.world], &s.task)?;
            let (_, trace) = descend(&guess, robot, sdf, &solver.objective, &solver.descent)?;
            let secs = t0.elapsed().as_secs_f64();
            let firsts: Vec<Option<usize>> = multi.runs.iter().map(|r| r.trace.first_feasible).collect();
            Ok((
                TaskRow {
                    sample: i,
                    world: s.task.world,
                    straight: firsts[0],
                    network: trace.first_feasible,
                    starts: firsts[1..].to_vec(),
                },
                secs,
            ))
        })
        .collect::<CliResult<_>>()?;
    let seconds = results.iter().map(|r| r.1).sum::<f64>() / results.len() as f64;
    let rows: Vec<TaskRow> = results.into_iter().map(|r| r.0).collect();
    Ok(report_from_rows(rows, bench.budget, bench.histogram_bins, seconds))
}

pub fn report_from_rows(rows: Vec<TaskRow>, budget: usize, bins: usize, seconds: f64) -> EvalReport {
    let solved_iters: Vec<usize> = rows.iter().filter_map(|r| r.network.filter(|&k| k <= budget)).collect();
    EvalReport {
        curves: curves(&rows, budget),
        histogram: histogram(&rows, budget, bins),
        network_mean_iters: (!solved_iters.is_empty())
            .then(|| solved_iters.iter().sum::<usize>() as f64 / solved_iters.len() as f64),
        network_worst_iters: solved_iters.iter().max().copied(),
        network_seconds: seconds,
        rows,
        budget,
    }
}

/// Dominance summary used by the report and the acceptance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dominance {
    /// Budgets ≥ 5 where the network is not strictly above the average.
    pub below_average: Vec<usize>,
    /// Budgets where the network is strictly above the best start.
    pub above_best: usize,
    pub budgets: usize,
}

pub fn dominance(c: &Curves) -> Dominance {
    let n = c.network.len();
    Dominance {
        below_average: (5..n).filter(|&b| c.network[b] <= c.average[b]).collect(),
        above_best: (0..n).filter(|&b| c.network[b] > c.best[b]).count(),
        budgets: n,
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|k| k.to_string()).unwrap_or_default()
}

pub const TASKS_CSV: &str = "bench_tasks.csv";
pub const STARTS_CSV: &str = "bench_starts.csv";
pub const PHI_CSV: &str = "bench_phi.csv";
pub const HIST_CSV: &str = "bench_hist.csv";
pub const SUMMARY: &str = "bench_summary.toml";

/// Writes the per-task rows, the aggregates and the two figures into `dir`.
pub fn write_report(dir: &Path, config: &Config, report: &EvalReport) -> CliResult<()> {
    let header = csv_header(config, "bench");
    let mut tasks = header.clone();
    tasks.push_str("sample,world,straight_first_feasible,network_first_feasible\n");
    let mut starts = header.clone();
    starts.push_str("sample,start,first_feasible\n");
    for r in &report.rows {
        tasks.push_str(&format!("{},{},{},{}\n", r.sample, r.world, opt(r.straight), opt(r.network)));
        for (k, s) in r.starts.iter().enumerate() {
            starts.push_str(&format!("{},{},{}\n", r.sample, k + 1, opt(*s)));
        }
    }
    write_text(&dir.join(TASKS_CSV), &tasks)?;
    write_text(&dir.join(STARTS_CSV), &starts)?;
    write_aggregates(dir, &header, report)?;

    let c = &report.curves;
    let d = dominance(c);
    let phi = |v: &[f64]| format!("{:.6}", v[report.budget]);
    let summary = format!(
        "# bpsplan bench\nfingerprint = \"{}\"\nseeds = \"{}\"\ntasks = {}\nbudget = {}\nrandom_starts = {}\n\
         phi_straight = {}\nphi_multistart_average = {}\nphi_multistart_best = {}\nphi_network = {}\n\
         {}budgets_network_above_best = {}\nbudgets_from_5_network_not_above_average = {}\n\
         # starts needed for 90% confidence at 10% per-start success\nrequired_starts_10pct_90conf = {}\n",
        config.fingerprint(),
        config.seeds_line(),
        report.rows.len(),
        report.budget,
        config.bench.n_starts,
        phi(&c.straight),
        phi(&c.average),
        phi(&c.best),
        phi(&c.network),
        iteration_lines(report),
        d.above_best,
        d.below_average.len(),
        required_starts(0.1, 0.9)?,
    );
    write_text(&dir.join(SUMMARY), &summary)
}

/// Iterations to feasibility over the network-solved tasks; omitted when
/// there are none.
fn iteration_lines(report: &EvalReport) -> String {
    match (report.network_mean_iters, report.network_worst_iters) {
        (Some(mean), Some(worst)) => {
            format!("network_mean_iterations = {mean:.4}\nnetwork_worst_iterations = {worst}\n")
        }
        _ => String::new(),
    }
}

/// φ table, histogram table and figures; a pure function of the rows.
pub fn write_aggregates(dir: &Path, header: &str, report: &EvalReport) -> CliResult<()> {
    let c = &report.curves;
    let mut phi = header.to_string();
    phi.push_str("budget,straight,multistart_average,multistart_best,network\n");
    for b in 0..=report.budget {
        phi.push_str(&format!(
            "{b},{:.6},{:.6},{:.6},{:.6}\n",
            c.straight[b], c.average[b], c.best[b], c.network[b]
        ));
    }
    write_text(&dir.join(PHI_CSV), &phi)?;
    let mut hist = header.to_string();
    hist.push_str("bin_low,bin_high,tasks\n");
    for (lo, hi, n) in &report.histogram {
        hist.push_str(&format!("{lo:.4},{hi:.4},{n}\n"));
    }
    write_text(&dir.join(HIST_CSV), &hist)?;

    let xs: Vec<f64> = (0..=report.budget).map(|b| b as f64).collect();
    let series = [
        ("straight line", &c.straight),
        ("multi-start average", &c.average),
        ("multi-start best", &c.best),
        ("network", &c.network),
    ];
    let lines: Vec<svg::Series> = series
        .iter()
        .map(|(name, ys)| svg::Series {
            name: name.to_string(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        })
        .collect();
    write_text(
        &dir.join("bench_phi.svg"),
        &svg::line_chart("Feasibility vs. iterations", "iterations", "feasibility rate", &lines),
    )?;
    write_text(
        &dir.join("bench_hist.svg"),
        &svg::histogram(
            &format!("Random start feasible fraction after {} iterations", report.budget),
            "feasible fraction of random starts",
            "tasks",
            &report.histogram,
        ),
    )
}

/// Parses the per-task and per-start tables written by [`write_report`].
pub fn read_rows(dir: &Path) -> CliResult<Vec<TaskRow>> {
    let reader = |name: &str| -> CliResult<csv::Reader<std::fs::File>> {
        let path = dir.join(name);
        let file = std::fs::File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
    };
    let parse_opt = |s: &str| -> CliResult<Option<usize>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| CliError::Data(format!("bad iteration '{s}'")))
        }
    };
    let parse = |s: &str| -> CliResult<usize> {
        s.parse().map_err(|_| CliError::Data(format!("bad index '{s}'")))
    };
    let mut rows = Vec::new();
    for rec in reader(TASKS_CSV)?.records() {
        let rec = rec?;
        rows.push(TaskRow {
            sample: parse(&rec[0])?,
            world: parse(&rec[1])?,
            straight: parse_opt(&rec[2])?,
            network: parse_opt(&rec[3])?,
            starts: Vec::new(),
        });
    }
    let index: std::collections::HashMap<usize, usize> =
        rows.iter().enumerate().map(|(k, r)| (r.sample, k)).collect();
    for rec in reader(STARTS_CSV)?.records() {
        let rec = rec?;
        let sample = parse(&rec[0])?;
        let k = *index
            .get(&sample)
            .ok_or_else(|| CliError::Data(format!("start row for unknown sample {sample}")))?;
        rows[k].starts.push(parse_opt(&rec[2])?);
    }
    Ok(rows)
}
