//! Experiment drivers: multi-task vs task-specific comparisons over a grid
//! of data budgets, mix ratios, and seeds.
//!
//! Within one experiment every condition at a given seed trains from the
//! same initial weights, draws its records as prefixes of one shared
//! training pool, and is scored on one shared novel-object pool whose hash
//! is re-checked per condition. Runs execute in parallel worker slots; the
//! CSV and the trend report are assembled in plan order, so output bytes do
//! not depend on scheduling.

pub mod csvout;
pub mod metrics;
pub mod plan;
pub mod trend;

use rayon::prelude::*;

pub use csvout::{metric_name, parse_csv, to_csv, MetricRow, CSV_HEADER};
pub use plan::{apportion, ExperimentPlan, ScaleConfig};
pub use trend::{bootstrap_trend, TrendSummary};

use crate::data::{GraspSample, PokeSample, PushSample, Task};
use crate::error::{Error, Result};
use crate::net::NetConfig;
use crate::optim::RmsPropConfig;
use crate::persist::crc32::Crc32;
use crate::train::{TrainData, Trainer};
use crate::world::{self, Pool, TaskMix, WorldConfig};

/// Finished experiment: CSV rows and a human-readable trend report, both
/// byte-deterministic for a fixed plan.
#[derive(Debug, Clone, PartialEq)]
pub struct FigOutput {
    pub csv: String,
    pub report: String,
}

struct SeedPools {
    seed: u64,
    grasp_train: Vec<GraspSample>,
    push_train: Vec<PushSample>,
    poke_train: Vec<PokeSample>,
    grasp_eval: Vec<GraspSample>,
    push_eval: Vec<PushSample>,
    poke_eval: Vec<PokeSample>,
    eval_hashes: [u32; 3],
}

fn hash_grasp(samples: &[GraspSample]) -> u32 {
    let mut h = Crc32::new();
    for s in samples {
        h.update(s.patch.bytes());
        h.update(&[s.theta, s.label]);
    }
    h.finish()
}

fn hash_push(samples: &[PushSample]) -> u32 {
    let mut h = Crc32::new();
    for s in samples {
        h.update(s.begin.bytes());
        h.update(s.end.bytes());
        for a in s.action {
            h.update(&a.to_le_bytes());
        }
    }
    h.finish()
}

fn hash_poke(samples: &[PokeSample]) -> u32 {
    let mut h = Crc32::new();
    for s in samples {
        h.update(s.image.bytes());
        for r in s.response {
            h.update(&r.to_le_bytes());
        }
    }
    h.finish()
}

fn build_pools(
    world: &WorldConfig,
    seed: u64,
    train_mix: TaskMix,
    eval_mix: TaskMix,
) -> Result<SeedPools> {
    let mut pools = SeedPools {
        seed,
        grasp_train: Vec::new(),
        push_train: Vec::new(),
        poke_train: Vec::new(),
        grasp_eval: Vec::new(),
        push_eval: Vec::new(),
        poke_eval: Vec::new(),
        eval_hashes: [0; 3],
    };
    for ds in world::generate(world, train_mix, seed, Pool::Train)? {
        match ds {
            crate::data::Dataset::Grasp(v) => pools.grasp_train = v,
            crate::data::Dataset::Push(v) => pools.push_train = v,
            crate::data::Dataset::Poke(v) => pools.poke_train = v,
        }
    }
    for ds in world::generate(world, eval_mix, seed, Pool::Novel)? {
        match ds {
            crate::data::Dataset::Grasp(v) => pools.grasp_eval = v,
            crate::data::Dataset::Push(v) => pools.push_eval = v,
            crate::data::Dataset::Poke(v) => pools.poke_eval = v,
        }
    }
    pools.eval_hashes = [
        hash_grasp(&pools.grasp_eval),
        hash_push(&pools.push_eval),
        hash_poke(&pools.poke_eval),
    ];
    Ok(pools)
}

fn condition_label(ratios: [f64; 3]) -> String {
    let pct = |r: f64| (r * 1000.0).round() / 10.0;
    format!("g{}_p{}_k{}", pct(ratios[0]), pct(ratios[1]), pct(ratios[2]))
}

struct RunOutput {
    rows: Vec<MetricRow>,
    sanity_lines: Vec<String>,
}

fn run_condition(
    world_cfg: &WorldConfig,
    scale: &ScaleConfig,
    experiment: &str,
    n_total: usize,
    ratios: [f64; 3],
    pools: &SeedPools,
) -> Result<RunOutput> {
    let mix = apportion(n_total, ratios);
    let seed = pools.seed;
    let data = TrainData {
        grasp: pools.grasp_train[..mix.grasp].to_vec(),
        push: pools.push_train[..mix.push].to_vec(),
        poke: pools.poke_train[..mix.poke].to_vec(),
    };
    let _ = world_cfg;
    let net_cfg = NetConfig { width_scale: scale.width_scale };
    let opt_cfg = RmsPropConfig { schedule_period: scale.schedule_period, ..Default::default() };
    let mut trainer = Trainer::new(net_cfg, opt_cfg, scale.batch, seed, data)?;

    // Controlled-comparison audit: the eval pools this run scores against
    // must hash identically to the pools built for this seed.
    let audited = [
        (mix.grasp > 0, hash_grasp(&pools.grasp_eval), pools.eval_hashes[0]),
        (mix.push > 0, hash_push(&pools.push_eval), pools.eval_hashes[1]),
        (mix.poke > 0, hash_poke(&pools.poke_eval), pools.eval_hashes[2]),
    ];
    for (used, now, stored) in audited {
        if used && now != stored {
            return Err(Error::contract(
                "experiment",
                format!("eval pool hash diverged: {now:#010x} vs {stored:#010x}"),
            ));
        }
    }

    let eval_all = |trainer: &mut Trainer| -> Result<Vec<(Task, f64)>> {
        let mut out = Vec::new();
        if mix.grasp > 0 {
            out.push((Task::Grasp, metrics::eval_grasp(&mut trainer.net, &pools.grasp_eval)?));
        }
        if mix.push > 0 {
            out.push((Task::Push, metrics::eval_push(&mut trainer.net, &pools.push_eval)?));
        }
        if mix.poke > 0 {
            out.push((Task::Poke, metrics::eval_poke(&mut trainer.net, &pools.poke_eval)?));
        }
        Ok(out)
    };

    let mut rows = Vec::new();
    let untrained = eval_all(&mut trainer)?;
    for &(task, value) in &untrained {
        rows.push(MetricRow {
            experiment: experiment.to_string(),
            seed,
            task,
            metric: metric_name(task),
            value,
            n_total,
            ratios,
            iteration: 0,
        });
    }

    trainer.run_to(scale.iterations)?;

    let trained = eval_all(&mut trainer)?;
    let mut sanity_lines = Vec::new();
    for (&(task, before), &(_, after)) in untrained.iter().zip(trained.iter()) {
        rows.push(MetricRow {
            experiment: experiment.to_string(),
            seed,
            task,
            metric: metric_name(task),
            value: after,
            n_total,
            ratios,
            iteration: scale.iterations,
        });
        sanity_lines.push(format!(
            "sanity n={} seed={} cond={} task={} untrained={} trained={} improved={}",
            n_total,
            seed,
            condition_label(ratios),
            task.name(),
            before,
            after,
            after < before
        ));
    }
    Ok(RunOutput { rows, sanity_lines })
}

fn run_matrix(
    world_cfg: &WorldConfig,
    scale: &ScaleConfig,
    experiment: &str,
    ns: &[usize],
    seeds: &[u64],
    conditions: &[[f64; 3]],
) -> Result<FigOutput> {
    if ns.is_empty() || seeds.is_empty() || conditions.is_empty() {
        return Err(Error::contract("experiment", "empty plan axis"));
    }
    for &ratios in conditions {
        let plan = ExperimentPlan {
            id: experiment.to_string(),
            total: ns[0],
            ratios,
            seeds: seeds.to_vec(),
            iterations: scale.iterations,
            eval_pool: scale.eval_pool,
            metrics: active_metrics(conditions),
        };
        plan.validate()?;
    }

    // The per-seed training pool holds the max any condition will slice.
    let mut train_mix = TaskMix::default();
    for &n in ns {
        for &ratios in conditions {
            let m = apportion(n, ratios);
            train_mix.grasp = train_mix.grasp.max(m.grasp);
            train_mix.push = train_mix.push.max(m.push);
            train_mix.poke = train_mix.poke.max(m.poke);
        }
    }
    let task_used = |i: usize| conditions.iter().any(|r| r[i] > 0.0);
    let eval_mix = TaskMix {
        grasp: if task_used(0) { scale.eval_pool } else { 0 },
        push: if task_used(1) { scale.eval_pool } else { 0 },
        poke: if task_used(2) { scale.eval_pool } else { 0 },
    };

    let pools: Vec<SeedPools> = seeds
        .par_iter()
        .map(|&seed| build_pools(world_cfg, seed, train_mix, eval_mix))
        .collect::<Result<_>>()?;

    // Plan order: n-major, then seed, then condition.
    let mut specs = Vec::new();
    for ni in 0..ns.len() {
        for (si, _) in seeds.iter().enumerate() {
            for (ci, _) in conditions.iter().enumerate() {
                specs.push((ni, si, ci));
            }
        }
    }
    let outputs: Vec<RunOutput> = specs
        .par_iter()
        .map(|&(ni, si, ci)| {
            run_condition(world_cfg, scale, experiment, ns[ni], conditions[ci], &pools[si])
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut sanity = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        sanity.extend(out.sanity_lines);
    }
    let csv = to_csv(&rows);
    let report = build_report(experiment, scale, ns, seeds, conditions, &pools, &rows, &sanity);
    Ok(FigOutput { csv, report })
}

fn active_metrics(conditions: &[[f64; 3]]) -> Vec<&'static str> {
    let mut out = Vec::new();
    if conditions.iter().any(|r| r[0] > 0.0) {
        out.push("grasp_error");
    }
    if conditions.iter().any(|r| r[1] > 0.0) {
        out.push("push_mse");
    }
    if conditions.iter().any(|r| r[2] > 0.0) {
        out.push("poke_mse");
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    experiment: &str,
    scale: &ScaleConfig,
    ns: &[usize],
    seeds: &[u64],
    conditions: &[[f64; 3]],
    pools: &[SeedPools],
    rows: &[MetricRow],
    sanity: &[String],
) -> String {
    let mut r = String::new();
    r.push_str(&format!("experiment {experiment}\n"));
    r.push_str(&format!(
        "scale width={}/{} batch={} iterations={} schedule_period={} eval_pool={}\n",
        scale.width_scale.num,
        scale.width_scale.den,
        scale.batch,
        scale.iterations,
        scale.schedule_period,
        scale.eval_pool
    ));
    for p in pools {
        r.push_str(&format!(
            "eval-pools seed={} grasp={:#010x} push={:#010x} poke={:#010x}\n",
            p.seed, p.eval_hashes[0], p.eval_hashes[1], p.eval_hashes[2]
        ));
    }
    for line in sanity {
        r.push_str(line);
        r.push('\n');
    }

    // Trained metric for (n, seed, task, condition).
    let value_of = |n: usize, seed: u64, task: Task, ratios: [f64; 3]| -> Option<f64> {
        rows.iter()
            .find(|row| {
                row.n_total == n
                    && row.seed == seed
                    && row.task == task
                    && row.ratios == ratios
                    && row.iteration == scale.iterations
            })
            .map(|row| row.value)
    };

    let tasks = [(0, Task::Grasp), (1, Task::Push), (2, Task::Poke)];
    let mut trend_counter = 0u64;
    for &n in ns {
        for &(ti, task) in &tasks {
            let baseline = conditions.iter().find(|r| r[ti] == 1.0);
            let Some(&baseline) = baseline else { continue };
            for &ratios in conditions.iter().filter(|r| r[ti] > 0.0 && r[ti] < 1.0) {
                let deltas: Vec<f64> = seeds
                    .iter()
                    .filter_map(|&s| {
                        Some(value_of(n, s, task, baseline)? - value_of(n, s, task, ratios)?)
                    })
                    .collect();
                if deltas.is_empty() {
                    continue;
                }
                trend_counter += 1;
                let t = bootstrap_trend(&deltas, trend_counter);
                r.push_str(&format!(
                    "trend n={} task={} baseline={} vs={} delta=task_specific_minus_multitask {}\n",
                    n,
                    task.name(),
                    condition_label(baseline),
                    condition_label(ratios),
                    t
                ));
            }

            // Which condition was best for this task on average?
            let mut best: Option<(f64, [f64; 3])> = None;
            for &ratios in conditions.iter().filter(|r| r[ti] > 0.0) {
                let vals: Vec<f64> =
                    seeds.iter().filter_map(|&s| value_of(n, s, task, ratios)).collect();
                if vals.is_empty() {
                    continue;
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                if best.map_or(true, |(b, _)| mean < b) {
                    best = Some((mean, ratios));
                }
            }
            if let Some((mean, ratios)) = best {
                r.push_str(&format!(
                    "best n={} task={} cond={} mean={}\n",
                    n,
                    task.name(),
                    condition_label(ratios),
                    mean
                ));
            }
        }
    }
    r
}

/// Fixed-budget replacement study: task-specific training on the full budget
/// against an even two-task split, per budget and seed.
pub fn run_fig5(
    world_cfg: &WorldConfig,
    scale: &ScaleConfig,
    ns: &[usize],
    seeds: &[u64],
) -> Result<FigOutput> {
    let conditions = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]];
    run_matrix(world_cfg, scale, "fig5", ns, seeds, &conditions)
}

pub const FIG5_DEFAULT_NS: [usize; 2] = [500, 2000];

/// Two-task mix-ratio sweep over r in {0.25, 0.5, 0.75, 1.0} for each task.
pub fn run_fig6(
    world_cfg: &WorldConfig,
    scale: &ScaleConfig,
    ns: &[usize],
    seeds: &[u64],
) -> Result<FigOutput> {
    let conditions = [
        [1.0, 0.0, 0.0],
        [0.75, 0.25, 0.0],
        [0.5, 0.5, 0.0],
        [0.25, 0.75, 0.0],
        [0.0, 1.0, 0.0],
    ];
    run_matrix(world_cfg, scale, "fig6", ns, seeds, &conditions)
}

/// Default fig6 budgets for a given scale preset (5K and 20K shrunk by the
/// width scale).
pub fn fig6_default_ns(scale: &ScaleConfig) -> Vec<usize> {
    let s = scale.width_scale.as_f64();
    vec![(5000.0 * s).round() as usize, (20000.0 * s).round() as usize]
}

/// Three-task mixtures around each primary task, including the named
/// 62.5/25/12.5 points.
pub fn run_fig7(
    world_cfg: &WorldConfig,
    scale: &ScaleConfig,
    ns: &[usize],
    seeds: &[u64],
) -> Result<FigOutput> {
    let conditions = [
        [1.0, 0.0, 0.0],
        [0.625, 0.25, 0.125],
        [0.625, 0.125, 0.25],
        [0.5, 0.25, 0.25],
        [0.0, 1.0, 0.0],
        [0.25, 0.625, 0.125],
        [0.125, 0.625, 0.25],
        [0.25, 0.5, 0.25],
    ];
    run_matrix(world_cfg, scale, "fig7", ns, seeds, &conditions)
}

pub fn fig7_default_ns(scale: &ScaleConfig) -> Vec<usize> {
    let s = scale.width_scale.as_f64();
    vec![(4000.0 * s).round() as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_scale() -> ScaleConfig {
        let mut s = ScaleConfig::from_ratio(1, 16).unwrap();
        s.iterations = 6;
        s.schedule_period = 3;
        s.batch = 4;
        s.eval_pool = 8;
        s
    }

    #[test]
    fn fig5_smoke_deterministic_and_schema_valid() {
        let world_cfg = WorldConfig::default();
        let scale = tiny_scale();
        let a = run_fig5(&world_cfg, &scale, &[16], &[1, 2]).unwrap();
        let b = run_fig5(&world_cfg, &scale, &[16], &[1, 2]).unwrap();
        assert_eq!(a, b);

        let rows = parse_csv(&a.csv).expect("schema-valid CSV");
        // 3 conditions x 2 seeds; grasp-only and push-only emit 1 task each,
        // joint emits 2; each task appears untrained + trained.
        assert_eq!(rows.len(), 2 * (1 + 1 + 2) * 2);
        assert!(a.report.contains("trend"));
        assert!(a.report.contains("eval-pools"));
        for row in &rows {
            assert_eq!(row.experiment, "fig5");
            if row.task == Task::Grasp {
                assert!((0.0..=1.0).contains(&row.value));
            } else {
                assert!(row.value >= 0.0);
            }
        }
    }

    #[test]
    fn empty_axes_rejected() {
        let world_cfg = WorldConfig::default();
        let scale = tiny_scale();
        assert!(run_fig5(&world_cfg, &scale, &[], &[1]).is_err());
        assert!(run_fig5(&world_cfg, &scale, &[16], &[]).is_err());
    }
}
