use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use conspin::config::SpecFile;
use conspin::UniversalConstants;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit status 2.
    Validation(String),
    /// Numerical failure: exit status 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<conspin::Error> for CliError {
    fn from(e: conspin::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

pub struct Context {
    pub command: &'static str,
    pub spec: SpecFile,
    pub seeds: Vec<u64>,
    pub consts: UniversalConstants,
    pub pool: rayon::ThreadPool,
    config_path: PathBuf,
    out: PathBuf,
    workers: usize,
    params: serde_json::Value,
    summary: serde_json::Map<String, serde_json::Value>,
    outputs: Vec<String>,
    start: Instant,
}

/// Parses `constants.NAME=VALUE`.
fn parse_set(s: &str) -> CliResult<(String, f64)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set {s:?}: expected constants.NAME=VALUE")))?;
    let name = key
        .strip_prefix("constants.")
        .ok_or_else(|| CliError::Validation(format!("--set {s:?}: only constants.* can be set")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("--set {s:?}: {value:?} is not a number")))?;
    Ok((name.to_string(), v))
}

impl Context {
    pub fn new(
        command: &'static str,
        config: &Path,
        seeds: Vec<u64>,
        out: PathBuf,
        workers: Option<usize>,
        sets: &[String],
    ) -> CliResult<Self> {
        let mut spec = SpecFile::load(config)?;
        for s in sets {
            let (name, v) = parse_set(s)?;
            spec.constants.set(&name, v)?;
        }
        let seeds = if !seeds.is_empty() {
            seeds
        } else if !spec.seeds.is_empty() {
            spec.seeds.clone()
        } else {
            vec![0]
        };
        if workers == Some(0) {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            builder = builder.num_threads(w);
        }
        let pool = builder.build().map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
        fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
        Ok(Context {
            command,
            consts: spec.constants,
            workers: pool.current_num_threads(),
            spec,
            seeds,
            pool,
            config_path: config.to_path_buf(),
            out,
            params: serde_json::Value::Null,
            summary: serde_json::Map::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    /// Parameters of this subcommand, recorded in the manifest.
    pub fn params<T: DeserializeOwned + Default + Serialize>(&mut self) -> CliResult<T> {
        let p: T = self.spec.params(self.command)?;
        self.params = serde_json::to_value(&p).map_err(|e| CliError::Numeric(e.to_string()))?;
        Ok(p)
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.out.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        let constants: serde_json::Map<String, serde_json::Value> =
            self.consts.entries().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let mut spec = self.spec.clone();
        spec.constants = self.consts;
        let mut outputs = self.outputs.clone();
        outputs.push("manifest.json".into());
        let manifest = json!({
            "subcommand": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_path": self.config_path.display().to_string(),
            "spec": spec,
            "seeds": self.seeds,
            "workers": self.workers,
            "params": self.params,
            "constants": constants,
            "summary": self.summary,
            "outputs": outputs,
            "wall_time_s": self.start.elapsed().as_secs_f64(),
        });
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        self.outputs.push("manifest.json".into());
        Ok(())
    }
}

/// Decorrelated per-point seed.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_parsing() {
        assert_eq!(parse_set("constants.c_ls=0.5").unwrap(), ("c_ls".into(), 0.5));
        assert!(parse_set("c_ls=0.5").is_err());
        assert!(parse_set("constants.c_ls").is_err());
        assert!(parse_set("constants.c_ls=x").is_err());
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(1, 0), point_seed(1, 1));
        assert_ne!(point_seed(1, 0), point_seed(2, 0));
        assert_eq!(point_seed(7, 3), point_seed(7, 3));
    }
}
