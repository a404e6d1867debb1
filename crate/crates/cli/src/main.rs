//! `mtl` command line: generate synthetic datasets, train the multi-task
//! network, evaluate checkpoints, and run the experiment suites.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (bad or corrupt
//! files), 3 numeric failure (non-finite loss).

mod plan_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtl_core::data::{Dataset, Task};
use mtl_core::error::{Error, Result};
use mtl_core::experiment::{
    self, fig6_default_ns, fig7_default_ns, metrics, ScaleConfig, FIG5_DEFAULT_NS,
};
use mtl_core::net::NetConfig;
use mtl_core::optim::RmsPropConfig;
use mtl_core::persist::{load_dataset, save_dataset, Checkpoint};
use mtl_core::train::{TrainData, Trainer};
use mtl_core::world::{self, Pool, TaskMix, WorldConfig};

#[derive(Parser)]
#[command(name = "mtl", version, about = "Multi-task grasp/push/poke learning on a synthetic planar world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic dataset files.
    GenData(GenDataArgs),
    /// Train a model from a plan file.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset file.
    Eval(EvalArgs),
    /// Run an experiment suite and write its CSV and trend report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Task mix as grasp,push,poke ratios, e.g. 0.5,0.5,0
    #[arg(long = "task-mix")]
    task_mix: String,
    /// Total number of records across tasks.
    #[arg(long)]
    n: usize,
    /// Generation seed.
    #[arg(long)]
    seed: u64,
    /// Object pool: train or novel (the pools are disjoint).
    #[arg(long, default_value = "train")]
    pool: String,
    /// Output directory for <task>.mtmd files.
    #[arg(long)]
    out: PathBuf,
    /// Sample grasp labels naturally instead of balancing to ~50/50.
    #[arg(long)]
    unbalanced: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Plan file (key=value lines; see README).
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for model.mtck and train_log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset file to score it on.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which suite: fig5, fig6, or fig7.
    which: String,
    /// Scale preset, e.g. 1/4 or 0.0625.
    #[arg(long, default_value = "1/4")]
    scale: String,
    /// Comma-separated seeds, e.g. 1,2,3
    #[arg(long, default_value = "1,2,3")]
    seeds: String,
    /// Comma-separated total data budgets; defaults depend on the suite.
    #[arg(long)]
    ns: Option<String>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Trend report path (default: <out>.report.txt).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_ratio_triple(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::parse(format!("task mix '{s}' must be three comma-separated numbers")));
    }
    let mut r = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        r[i] = p.trim().parse().map_err(|_| Error::parse(format!("bad ratio '{p}'")))?;
        if r[i] < 0.0 {
            return Err(Error::parse("ratios must be nonnegative"));
        }
    }
    let sum: f64 = r.iter().sum();
    if sum <= 0.0 {
        return Err(Error::parse("task mix must be positive"));
    }
    Ok([r[0] / sum, r[1] / sum, r[2] / sum])
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::parse(format!("bad number '{p}'"))))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::parse(format!("bad number '{p}'"))))
        .collect()
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let ratios = parse_ratio_triple(&args.task_mix)?;
    let pool = Pool::parse(&args.pool)?;
    let mix_counts = experiment::apportion(args.n, ratios);
    let world_cfg = WorldConfig { balanced_grasp: !args.unbalanced, ..WorldConfig::default() };
    let datasets = world::generate(&world_cfg, mix_counts, args.seed, pool)?;
    std::fs::create_dir_all(&args.out)?;
    for ds in &datasets {
        let path = args.out.join(format!("{}.mtmd", ds.task().name()));
        save_dataset(&path, ds)?;
        println!("wrote {} ({} records)", path.display(), ds.len());
    }
    Ok(())
}

fn load_train_data(plan: &plan_file::TrainPlan) -> Result<TrainData> {
    let mut data = TrainData::default();
    let world_cfg =
        WorldConfig { balanced_grasp: !plan.unbalanced_grasp, ..WorldConfig::default() };
    let mix = TaskMix { grasp: plan.n_grasp, push: plan.n_push, poke: plan.n_poke };
    if mix.total() > 0 {
        for ds in world::generate(&world_cfg, mix, plan.seed, Pool::Train)? {
            data.add(ds);
        }
    }
    for path in [&plan.grasp_data, &plan.push_data, &plan.poke_data].into_iter().flatten() {
        data.add(load_dataset(path)?);
    }
    Ok(data)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let plan = plan_file::load_plan(&args.plan)?;
    let data = load_train_data(&plan)?;

    let mut trainer = match &plan.resume {
        Some(ck_path) => Checkpoint::load(ck_path)?.into_trainer(plan.scale.batch, data)?,
        None => {
            let net_cfg = NetConfig { width_scale: plan.scale.width_scale };
            let opt_cfg = RmsPropConfig {
                schedule_period: plan.scale.schedule_period,
                ..Default::default()
            };
            Trainer::new(net_cfg, opt_cfg, plan.scale.batch, plan.seed, data)?
        }
    };

    std::fs::create_dir_all(&args.out)?;
    let mut log = String::from("iteration,grasp_loss,push_loss,poke_loss\r\n");
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    while trainer.iteration() < plan.scale.iterations {
        let losses = trainer.step()?;
        let it = trainer.iteration();
        if it == plan.scale.iterations || (plan.log_every > 0 && it % plan.log_every == 0) {
            log.push_str(&format!(
                "{},{},{},{}\r\n",
                it,
                fmt(losses.grasp),
                fmt(losses.push),
                fmt(losses.poke)
            ));
        }
    }

    let ck = Checkpoint::capture(&trainer);
    let model_path = args.out.join("model.mtck");
    ck.save(&model_path)?;
    std::fs::write(args.out.join("train_log.csv"), log)?;
    println!("trained to iteration {}", trainer.iteration());
    println!("wrote {}", model_path.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut net = ck.build_net()?;
    let ds = load_dataset(&args.dataset)?;
    let (task, metric, value, n) = match &ds {
        Dataset::Grasp(samples) => {
            (Task::Grasp, "grasp_error", metrics::eval_grasp(&mut net, samples)?, samples.len())
        }
        Dataset::Push(samples) => {
            (Task::Push, "push_mse", metrics::eval_push(&mut net, samples)?, samples.len())
        }
        Dataset::Poke(samples) => {
            (Task::Poke, "poke_mse", metrics::eval_poke(&mut net, samples)?, samples.len())
        }
    };
    println!("task={} metric={} value={} n={}", task.name(), metric, value, n);
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let scale = ScaleConfig::parse(&args.scale)?;
    let seeds = parse_u64_list(&args.seeds)?;
    let world_cfg = WorldConfig::default();
    let ns = match &args.ns {
        Some(s) => parse_usize_list(s)?,
        None => match args.which.as_str() {
            "fig5" => FIG5_DEFAULT_NS.to_vec(),
            "fig6" => fig6_default_ns(&scale),
            "fig7" => fig7_default_ns(&scale),
            _ => Vec::new(),
        },
    };
    let out = match args.which.as_str() {
        "fig5" => experiment::run_fig5(&world_cfg, &scale, &ns, &seeds)?,
        "fig6" => experiment::run_fig6(&world_cfg, &scale, &ns, &seeds)?,
        "fig7" => experiment::run_fig7(&world_cfg, &scale, &ns, &seeds)?,
        other => return Err(Error::parse(format!("unknown experiment '{other}'"))),
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&args.out, out.csv.as_bytes())?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.report.txt", args.out.display())));
    std::fs::write(&report_path, out.report.as_bytes())?;
    print!("{}", out.report);
    println!("wrote {}", args.out.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

/// Errors raised while validating command-line input map to exit code 1.
fn is_usage_error(cmd: &Command, err: &Error) -> bool {
    match err {
        Error::Parse { .. } => match cmd {
            // For these commands every Parse error comes from an argument.
            Command::GenData(_) | Command::Experiment(_) | Command::Eval(_) => true,
            // Train parses its plan file, which is data.
            Command::Train(_) => false,
        },
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output on stdout with code 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&cli.command, &e) {
                ExitCode::from(1)
            } else if e.is_numeric_error() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_triples_normalize() {
        assert_eq!(parse_ratio_triple("0.5,0.5,0").unwrap(), [0.5, 0.5, 0.0]);
        assert_eq!(parse_ratio_triple("1,1,2").unwrap(), [0.25, 0.25, 0.5]);
        assert!(parse_ratio_triple("1,1").is_err());
        assert!(parse_ratio_triple("-1,2,0").is_err());
        assert!(parse_ratio_triple("0,0,0").is_err());
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_u64_list("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_u64_list("1,x").is_err());
    }
}
