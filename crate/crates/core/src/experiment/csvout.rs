//! Metric rows and their RFC-4180 serialization (CRLF line endings, header
//! row, no quoting needed for this all-numeric schema).

use crate::data::Task;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub seed: u64,
    pub task: Task,
    pub metric: &'static str,
    pub value: f64,
    pub n_total: usize,
    pub ratios: [f64; 3],
    pub iteration: u64,
}

pub const CSV_HEADER: &str =
    "experiment,seed,task,metric,value,n_total,r_grasp,r_push,r_poke,iteration";

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Grasp => "grasp_error",
        Task::Push => "push_mse",
        Task::Poke => "poke_mse",
    }
}

pub fn to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push_str("\r\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\r\n",
            r.experiment,
            r.seed,
            r.task.name(),
            r.metric,
            r.value,
            r.n_total,
            r.ratios[0],
            r.ratios[1],
            r.ratios[2],
            r.iteration
        ));
    }
    out
}

/// Minimal parser for the schema above; used by tests and the trend report.
pub fn parse_csv(text: &str) -> Option<Vec<MetricRow>> {
    let mut lines = text.split("\r\n");
    if lines.next()? != CSV_HEADER {
        return None;
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return None;
        }
        let task = match f[2] {
            "grasp" => Task::Grasp,
            "push" => Task::Push,
            "poke" => Task::Poke,
            _ => return None,
        };
        rows.push(MetricRow {
            experiment: f[0].to_string(),
            seed: f[1].parse().ok()?,
            task,
            metric: metric_name(task),
            value: f[4].parse().ok()?,
            n_total: f[5].parse().ok()?,
            ratios: [f[6].parse().ok()?, f[7].parse().ok()?, f[8].parse().ok()?],
            iteration: f[9].parse().ok()?,
        });
    }
    Some(rows)
}
