//! Training plan files: flat `key=value` lines, `#` comments, blank lines
//! ignored. Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mtl_core::error::{Error, Result};
use mtl_core::experiment::ScaleConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub seed: u64,
    pub scale: ScaleConfig,
    pub n_grasp: usize,
    pub n_push: usize,
    pub n_poke: usize,
    pub grasp_data: Option<PathBuf>,
    pub push_data: Option<PathBuf>,
    pub poke_data: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub log_every: u64,
    pub unbalanced_grasp: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "scale",
    "width_scale",
    "iterations",
    "batch",
    "schedule_period",
    "eval_pool",
    "n_grasp",
    "n_push",
    "n_poke",
    "grasp_data",
    "push_data",
    "poke_data",
    "resume",
    "log_every",
    "unbalanced_grasp",
];

pub fn parse_plan(text: &str) -> Result<TrainPlan> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(format!("plan line {}: expected key=value", lineno + 1)));
        };
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::parse(format!("plan line {}: unknown key '{key}'", lineno + 1)));
        }
        if kv.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::parse(format!("plan line {}: duplicate key '{key}'", lineno + 1)));
        }
    }

    let get_num = |key: &str, default: u64| -> Result<u64> {
        match kv.get(key) {
            Some(v) => v.parse().map_err(|_| Error::parse(format!("bad {key}='{v}'"))),
            None => Ok(default),
        }
    };

    let mut scale = match kv.get("scale") {
        Some(v) => ScaleConfig::parse(v)?,
        None => ScaleConfig::desk_default(),
    };
    if let Some(v) = kv.get("width_scale") {
        scale.width_scale = ScaleConfig::parse(v)?.width_scale;
    }
    if kv.contains_key("iterations") {
        scale.iterations = get_num("iterations", 0)?;
    }
    if kv.contains_key("batch") {
        scale.batch = get_num("batch", 0)? as usize;
        if scale.batch == 0 {
            return Err(Error::parse("batch must be positive"));
        }
    }
    if kv.contains_key("schedule_period") {
        scale.schedule_period = get_num("schedule_period", 0)?.max(1);
    }
    if kv.contains_key("eval_pool") {
        scale.eval_pool = get_num("eval_pool", 0)? as usize;
    }

    Ok(TrainPlan {
        seed: get_num("seed", 0)?,
        scale,
        n_grasp: get_num("n_grasp", 0)? as usize,
        n_push: get_num("n_push", 0)? as usize,
        n_poke: get_num("n_poke", 0)? as usize,
        grasp_data: kv.get("grasp_data").map(PathBuf::from),
        push_data: kv.get("push_data").map(PathBuf::from),
        poke_data: kv.get("poke_data").map(PathBuf::from),
        resume: kv.get("resume").map(PathBuf::from),
        log_every: get_num("log_every", 100)?,
        unbalanced_grasp: match kv.get("unbalanced_grasp").map(String::as_str) {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(v) => return Err(Error::parse(format!("bad unbalanced_grasp='{v}'"))),
        },
    })
}

pub fn load_plan(path: &Path) -> Result<TrainPlan> {
    parse_plan(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_plan() {
        let p = parse_plan("seed=7\nn_grasp=100\n").unwrap();
        assert_eq!(p.seed, 7);
        assert_eq!(p.n_grasp, 100);
        assert_eq!(p.scale, ScaleConfig::desk_default());
    }

    #[test]
    fn comments_and_overrides() {
        let text = "\
# training plan
seed = 3
scale = 1/8
iterations = 40   # short run
batch = 8
";
        let p = parse_plan(text).unwrap();
        assert_eq!(p.seed, 3);
        assert_eq!(p.scale.width_scale.den, 8);
        assert_eq!(p.scale.iterations, 40);
        assert_eq!(p.scale.batch, 8);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(parse_plan("sede=3\n").is_err());
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(parse_plan("seed=1\nseed=2\n").is_err());
    }
}
